use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

pub const DEFAULT_TIMEOUT_S: f64 = 900.0;
pub const DEFAULT_MEM_LIMIT: u64 = 8 << 30;
pub const DEFAULT_MAX_PARALLEL: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub name: String,
    /// Whitespace-separated argv with `{instance}`, `{stats}` and `{bindir}`
    /// placeholders.
    pub template: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteManifest {
    pub name: String,
    pub solvers: Vec<SolverSpec>,
    /// Instance ids as written in the manifest.
    pub instances: Vec<String>,
    /// Directory instance ids are relative to.
    pub base_dir: PathBuf,
    pub timeout_s: f64,
    pub mem_limit_bytes: u64,
    pub max_parallel: usize,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestErrors(pub Vec<String>);

impl fmt::Display for ManifestErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} manifest error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ManifestErrors {}

impl SuiteManifest {
    pub fn new(name: &str, base_dir: &Path) -> Self {
        SuiteManifest {
            name: name.to_string(),
            solvers: Vec::new(),
            instances: Vec::new(),
            base_dir: base_dir.to_path_buf(),
            timeout_s: DEFAULT_TIMEOUT_S,
            mem_limit_bytes: DEFAULT_MEM_LIMIT,
            max_parallel: DEFAULT_MAX_PARALLEL,
            repetitions: 1,
            seed: 0,
        }
    }

    pub fn instance_path(&self, id: &str) -> PathBuf {
        self.base_dir.join(id)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ManifestErrors(vec![format!("{}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let m = Self::parse(&text, &base)?;
        m.validate()?;
        Ok(m)
    }

    /// Parses the line-oriented format, collecting every syntax error.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ManifestErrors> {
        #[derive(PartialEq)]
        enum Section {
            Top,
            Solvers,
            Instances,
        }
        let mut m = SuiteManifest::new("", base_dir);
        let mut errors = Vec::new();
        let mut section = Section::Top;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[solvers]" => {
                    section = Section::Solvers;
                    continue;
                }
                "[instances]" => {
                    section = Section::Instances;
                    continue;
                }
                _ if line.starts_with('[') => {
                    errors.push(format!("line {n}: unknown section {line}"));
                    continue;
                }
                _ => {}
            }
            if section == Section::Instances {
                m.instances.push(line.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {n}: expected key = value"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if section == Section::Solvers {
                m.solvers.push(SolverSpec {
                    name: key.to_string(),
                    template: value.to_string(),
                });
                continue;
            }
            let bad = |what: &str| format!("line {n}: invalid {what} '{value}'");
            match key {
                "name" => m.name = value.to_string(),
                "timeout_s" => match value.parse() {
                    Ok(v) => m.timeout_s = v,
                    Err(_) => errors.push(bad("timeout_s")),
                },
                "mem_limit_bytes" => match value.parse() {
                    Ok(v) => m.mem_limit_bytes = v,
                    Err(_) => errors.push(bad("mem_limit_bytes")),
                },
                "max_parallel" => match value.parse() {
                    Ok(v) => m.max_parallel = v,
                    Err(_) => errors.push(bad("max_parallel")),
                },
                "repetitions" => match value.parse() {
                    Ok(v) => m.repetitions = v,
                    Err(_) => errors.push(bad("repetitions")),
                },
                "seed" => match value.parse() {
                    Ok(v) => m.seed = v,
                    Err(_) => errors.push(bad("seed")),
                },
                _ => errors.push(format!("line {n}: unknown key '{key}'")),
            }
        }
        if errors.is_empty() {
            Ok(m)
        } else {
            Err(ManifestErrors(errors))
        }
    }

    /// Semantic checks, all reported at once.
    pub fn validate(&self) -> Result<(), ManifestErrors> {
        let mut errors = Vec::new();
        if self.name.is_empty() {
            errors.push("name is missing".to_string());
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            errors.push(format!("timeout_s must be positive, got {}", self.timeout_s));
        }
        if self.mem_limit_bytes == 0 {
            errors.push("mem_limit_bytes must be positive".to_string());
        }
        if self.max_parallel == 0 {
            errors.push("max_parallel must be at least 1".to_string());
        }
        if self.repetitions == 0 {
            errors.push("repetitions must be at least 1".to_string());
        }
        if self.solvers.is_empty() {
            errors.push("no solvers listed".to_string());
        }
        let mut names = BTreeSet::new();
        for s in &self.solvers {
            if !names.insert(&s.name) {
                errors.push(format!("duplicate solver '{}'", s.name));
            }
            if s.name.contains(',') || s.name.contains('"') {
                errors.push(format!("solver name '{}' contains a comma or quote", s.name));
            }
            if !s.template.contains("{instance}") {
                errors.push(format!("solver '{}' template lacks {{instance}}", s.name));
            }
        }
        if self.instances.is_empty() {
            errors.push("no instances listed".to_string());
        }
        let mut seen = BTreeSet::new();
        for id in &self.instances {
            if !seen.insert(id) {
                errors.push(format!("duplicate instance '{id}'"));
            }
            if !self.instance_path(id).is_file() {
                errors.push(format!("instance '{id}' does not exist"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ManifestErrors(errors))
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "name = {}\ntimeout_s = {}\nmem_limit_bytes = {}\nmax_parallel = {}\nrepetitions = {}\nseed = {}\n\n[solvers]\n",
            self.name, self.timeout_s, self.mem_limit_bytes, self.max_parallel, self.repetitions, self.seed
        );
        for sv in &self.solvers {
            s.push_str(&format!("{} = {}\n", sv.name, sv.template));
        }
        s.push_str("\n[instances]\n");
        for i in &self.instances {
            s.push_str(i);
            s.push('\n');
        }
        s
    }
}
