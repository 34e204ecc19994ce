//! Shared domain types and on-disk formats: image tensors, region masks,
//! noise schedules, preference samples, and the JSONL dataset codec.

mod codec;
mod dataset;
mod image;
mod sample;
mod schedule;

pub use codec::{decode_image, encode_image, mask_from_image, mask_to_image, ImageCodec, InlineTensor};
pub use dataset::{load_dataset, save_dataset, save_dataset_with_images};
pub use image::{ImageTensor, RegionMask};
pub use sample::{Difficulty, Keyword, PreferenceSample, TokenSeq};
pub use schedule::NoiseSchedule;
