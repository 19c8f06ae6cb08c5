//! Schema-driven tabular preprocessing, splits, and the synthetic
//! biased-data generator.

mod encode;
mod schema;
mod split;
mod synthetic;
mod table;

pub use encode::{
    decode_category, encode, fit_encoder, min_max, percentile, ColumnMeta, EncodeReport, EncodedDataset, EncoderMeta,
    ResolvedRule,
};
pub use schema::{ColumnKind, ColumnSpec, ContinuousEncoding, DatasetSchema, Rule, TargetSpec};
pub use split::{kfold, split};
pub use synthetic::{gen_synthetic, gen_synthetic_raw, synthetic_feature_names, RawSynthetic, SyntheticConfig};
pub use table::{type_rows, Cell, RawTarget, Row, Table, TypingReport};
