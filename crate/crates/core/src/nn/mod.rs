//! The embedding network: forward and backward LSTMs over the same input,
//! temporal average pooling of each, concatenation, two tanh dense layers,
//! and L2 normalization onto the unit sphere.

mod io;
mod lstm;
mod model;

pub(crate) use io::params_from_file;
pub use io::{load_params, load_params_for, read_model_file, save_params, write_model_file, ModelFile, ModelHeader, TensorEntry};
pub use lstm::{average_pool, lstm_backward, lstm_forward, LstmCache, LstmParams};
pub use model::{
    embed, embed_backward, embed_vector, init_params, DenseParams, Dims, ForwardCache, Gradients,
    TristouNetParams,
};
