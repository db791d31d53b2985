use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use objforge::config::PipelineConfig;
use objforge::corpus::{ingest_sources, Corpus};
use objforge::train::bundled_toy_corpus;
use objforge::{Error, Result};

use crate::GlobalArgs;

/// Configuration after command-line overrides, plus run-wide switches.
pub struct Context {
    pub cfg: PipelineConfig,
    pub dry_run: bool,
}

/// Missing inputs are the caller's mistake, not a run failure.
pub fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::config(format!("{what}: {} does not exist", path.display())))
    }
}

pub fn open(path: &Path, what: &str) -> Result<BufReader<File>> {
    require(path, what)?;
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

impl Context {
    pub fn new(args: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                require(path, "--config")?;
                PipelineConfig::load(path)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &args.out_dir {
            cfg.paths.out_dir = dir.clone();
        }
        if let Some(corpus) = &args.corpus {
            cfg.paths.corpus = Some(corpus.clone());
        }
        if args.jobs.is_some() {
            cfg.jobs = args.jobs;
        }
        if let Some(n) = cfg.jobs {
            if n == 0 {
                return Err(Error::config("jobs must be positive"));
            }
            // a second initialization only fails when a pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(Context { cfg, dry_run: args.dry_run })
    }

    /// Validates the whole configuration and returns it with every module
    /// seed derived from the root seed.
    pub fn checked(&self) -> Result<PipelineConfig> {
        self.cfg.validate()?;
        if let Some(p) = &self.cfg.paths.corpus {
            require(p, "paths.corpus")?;
        }
        Ok(self.cfg.seeded())
    }

    /// Reports a successful dry run; callers stop when this returns true.
    pub fn stop_here(&self) -> bool {
        if self.dry_run {
            eprintln!("dry run: configuration and inputs are valid");
        }
        self.dry_run
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.paths.out_dir
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    /// The configured corpus, or the bundled toy corpus when none is set.
    pub fn corpus(&self) -> Result<Corpus> {
        match &self.cfg.paths.corpus {
            Some(path) => load_corpus(path, &self.cfg),
            None => bundled_toy_corpus(),
        }
    }

    /// Writes `bytes` to `name` inside the output directory.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let dir = self.out_dir();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = self.out_path(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        eprintln!("wrote {}", path.display());
        Ok(path)
    }
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("jsonl")
}

/// Reads one canonical JSONL corpus, or segments one text file.
pub fn load_corpus(path: &Path, cfg: &PipelineConfig) -> Result<Corpus> {
    if is_jsonl(path) {
        return Corpus::read_jsonl(open(path, "corpus")?);
    }
    require(path, "corpus")?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ingest_sources(&[(source_name(path), bytes)], &cfg.segmentation.build()?)
}

pub fn source_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn split_inputs(paths: &[PathBuf]) -> (Vec<&PathBuf>, Vec<&PathBuf>) {
    paths.iter().partition(|p| is_jsonl(p))
}
