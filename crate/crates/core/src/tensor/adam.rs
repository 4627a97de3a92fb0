use super::{shape_err, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates for a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|p| (Tensor::zeros(p.shape()), Tensor::zeros(p.shape())))
            .unzip();
        Self { config, m, v, t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(shape_err(
                "adam_step",
                format!("{} params, {} grads, {} moments", params.len(), grads.len(), self.m.len()),
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(shape_err("adam_step", format!("{:?} vs {:?}", p.shape(), g.shape())));
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - (beta1 as f64).powi(self.t as i32);
        let bc2 = 1.0 - (beta2 as f64).powi(self.t as i32);
        let step_size = (lr as f64 / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            for (((w, &gv), mv), vv) in pd.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                *w -= step_size * *mv / (vv.sqrt() / bc2_sqrt + eps);
            }
        }
        Ok(())
    }
}
