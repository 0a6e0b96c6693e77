//! Small real-valued dense networks with hand-written backpropagation,
//! plus the complex pseudoinverse used by the decoder.

mod checkpoint;
mod dense;
mod gradcheck;
mod optim;
mod pinv;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, CheckpointDoc, LayerDoc};
pub use dense::{backprop_layers, dot as dense_dot, sigmoid, softmax_in_place, Activation, DenseNet, Gradients, Layer, LayerGrad, Tape};
pub use gradcheck::{gradient_check, rel_err, GradCheckReport};
pub use optim::{step_decay, Adam, Optimizer};
pub use pinv::{pinv, PINV_RTOL};
