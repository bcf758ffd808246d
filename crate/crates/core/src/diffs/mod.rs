//! Line diffing and the unified diff exchange format.

pub mod myers;
pub mod unified;

pub use unified::{
    apply_unified, diff_file, parse_unified, render_file_diff, render_file_map_diff, split_keep,
    ApplyError, DiffParseError, FileDiff, Hunk, HunkLine, LineTag,
};
