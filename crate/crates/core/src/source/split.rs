use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SourceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Assigns each item (given by its genre label) to a split, or to none when
/// the sizes do not use every item.
///
/// Every genre contributes to every split either the floor or the ceiling
/// of its proportional share, and the split totals are exact. The integer
/// table is found by controlled rounding as a small max-flow problem; the
/// seed decides both which genres receive the rounded-up shares and which
/// items go where.
pub fn stratified_split(labels: &[usize], sizes: [usize; 3], seed: u64) -> Result<Vec<Option<Split>>, SourceError> {
    let n = labels.len();
    let needed: usize = sizes.iter().sum();
    if needed > n || n == 0 {
        return Err(SourceError::InfeasibleSplit { sizes, needed, available: n });
    }
    let n_genres = labels.iter().max().map_or(0, |&g| g + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_genres];
    for (i, &g) in labels.iter().enumerate() {
        members[g].push(i);
    }
    for (genre, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < 3 {
            return Err(SourceError::GenreTooSmall { genre, count: m.len() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = [sizes[0], sizes[1], sizes[2], n - needed];
    let counts = controlled_rounding(&members.iter().map(Vec::len).collect::<Vec<_>>(), &columns, n, &mut rng);

    let mut out = vec![None; n];
    for (g, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut rng);
        let mut it = m.iter();
        for (s, split) in Split::ALL.iter().enumerate() {
            for &i in it.by_ref().take(counts[g][s]) {
                out[i] = Some(*split);
            }
        }
    }
    Ok(out)
}

/// Integer table with row sums `rows`, column sums `cols` and every cell
/// the floor or ceiling of `rows[g]·cols[s]/total`.
fn controlled_rounding(rows: &[usize], cols: &[usize], total: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let (g_n, s_n) = (rows.len(), cols.len());
    let mut table: Vec<Vec<usize>> = rows.iter().map(|&r| cols.iter().map(|&c| r * c / total).collect()).collect();
    // Nodes: 0 source, 1..=g_n rows, then s_n columns, then sink.
    let sink = 1 + g_n + s_n;
    let mut cap = vec![vec![0usize; sink + 1]; sink + 1];
    for g in 0..g_n {
        cap[0][1 + g] = rows[g] - table[g].iter().sum::<usize>();
        for s in 0..s_n {
            if rows[g] * cols[s] % total != 0 {
                cap[1 + g][1 + g_n + s] = 1;
            }
        }
    }
    for s in 0..s_n {
        cap[1 + g_n + s][sink] = cols[s] - (0..g_n).map(|g| table[g][s]).sum::<usize>();
    }
    let mut order: Vec<usize> = (1..sink).collect();
    order.shuffle(rng);
    let original = cap.clone();
    loop {
        let mut seen = vec![false; sink + 1];
        if !augment(0, sink, &mut cap, &mut seen, &order) {
            break;
        }
    }
    for g in 0..g_n {
        for s in 0..s_n {
            let (a, b) = (1 + g, 1 + g_n + s);
            table[g][s] += original[a][b] - cap[a][b];
        }
    }
    debug_assert!(table.iter().zip(rows).all(|(t, &r)| t.iter().sum::<usize>() == r));
    table
}

fn augment(u: usize, sink: usize, cap: &mut [Vec<usize>], seen: &mut [bool], order: &[usize]) -> bool {
    if u == sink {
        return true;
    }
    seen[u] = true;
    for &v in order.iter().chain(std::iter::once(&sink)) {
        if !seen[v] && cap[u][v] > 0 && augment(v, sink, cap, seen, order) {
            cap[u][v] -= 1;
            cap[v][u] += 1;
            return true;
        }
    }
    false
}
