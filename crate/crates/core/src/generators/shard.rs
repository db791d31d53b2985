use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Generator, Objective};
use crate::error::{Error, Result};

pub fn shard_file_name(objective: Objective, shard: usize) -> String {
    format!("{objective}-{shard:05}.jsonl")
}

/// Writes shards `shards` of `groups_per_shard` groups each into `dir`, one
/// example per line. Returns the written paths.
pub fn write_shards(
    gen: &Generator,
    dir: &Path,
    groups_per_shard: usize,
    shards: std::ops::Range<usize>,
) -> Result<Vec<PathBuf>> {
    if groups_per_shard == 0 {
        return Err(Error::config("groups per shard must be positive"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for shard in shards {
        let start = shard * groups_per_shard;
        if start >= gen.group_count() && shard > 0 {
            break;
        }
        let path = dir.join(shard_file_name(gen.objective(), shard));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for ex in gen.generate(start..start + groups_per_shard) {
            serde_json::to_writer(&mut out, &ex)?;
            out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Number of shards needed to cover every group.
pub fn shard_count(gen: &Generator, groups_per_shard: usize) -> usize {
    gen.group_count().div_ceil(groups_per_shard.max(1)).max(1)
}
