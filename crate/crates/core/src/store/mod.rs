//! Model container, architecture registry, native file format and defect
//! injection.

mod defect;
mod format;
mod model;
mod registry;

pub use defect::{inject_defect, DefectKind, DefectSpec};
pub use format::{load_model, model_from_bytes, model_to_bytes, save_model, MAGIC, VERSION};
pub use model::Model;
pub(crate) use model::init_param;
pub use registry::{build_architecture, canonical_arch, default_depth, is_supported, supported_list, SUPPORTED};
