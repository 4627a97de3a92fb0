pub mod audio;
pub mod dlr;
pub mod features;
pub mod manifest;
pub mod nn;
pub mod source;
pub mod synth;
pub mod target;
pub mod tensor;
