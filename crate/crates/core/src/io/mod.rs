//! On-disk formats: binary PGM images, `WTN1` raw tensors, IDX datasets and
//! PGM directories with a label CSV.

mod idx;
mod pgm;
mod pgm_dir;
pub mod synth;
mod wtn;

pub use idx::{load_idx_dataset, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use pgm::{quantize, read_pgm, write_pgm, GrayImage};
pub use pgm_dir::load_pgm_dir;
pub use wtn::{decode_wtn, encode_wtn, read_wtn, read_wtn_any, write_wtn, AnyTensor, WTN_MAGIC};
