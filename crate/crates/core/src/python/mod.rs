//! Python source analysis: parsing, declaration extraction, skeleton
//! rendering, and canonical unparse for patch normalization.

pub mod canonical;
pub mod elements;
pub mod parse;
pub mod skeleton;

pub use canonical::{canonicalize_module, CanonicalizationFailure};
pub use elements::{element_source, list_elements, CodeElement, ElementIndex, ElementKind};
pub use parse::{check_syntax, parse_module, LineIndex, ParseFailure};
pub use skeleton::{build_skeleton, render_skeleton, FileSkeleton, SkeletonEntry, SkeletonKind};
