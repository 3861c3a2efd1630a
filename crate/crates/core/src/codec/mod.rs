//! Block codecs and the layer compression pipeline.

mod backend;
mod pipeline;

pub use backend::{compress_block, decompress_block, CodecId, DEFAULT_ZSTD_LEVEL, MAX_LEVEL};
pub use pipeline::{
    compress_layer, compress_model, compress_quantized, decompress_layer, decompress_model,
    decompress_quantized, CompressedLayer, CompressedModel, Granularity, Mode, Payload,
    PipelineConfig, Transform, TransformChain, WHOLE_MODEL_NAME,
};
