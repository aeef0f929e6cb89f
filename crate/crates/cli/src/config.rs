//! Settings from an input file and `key=value` command-line tokens.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use abc_core::error::{Error, Result};

/// Keys understood by some task. Anything else is warned about.
pub const KNOWN_KEYS: &[&str] = &[
    "task",
    "seed",
    "threads",
    "estimationType",
    "params",
    "simName",
    "obsName",
    "numRetained",
    "maxReadSims",
    "pruneCorrelatedStats",
    "maxCor",
    "outputPrefix",
    "writeRetained",
    "standardizeStats",
    "obsPValue",
    "marDensPValue",
    "tukeyPValue",
    "tukeyProjections",
    "modelChoiceValidation",
    "modelChoiceMethod",
    "tolerance",
    "randomValidation",
    "retainedValidation",
    "posteriorDensityPoints",
    "diracPeakWidth",
    "jointPosteriors",
    "jointPosteriorDensityPoints",
    "plotData",
    "samplerType",
    "numSims",
    "outName",
    "estName",
    "simProgram",
    "simArgs",
    "simInputName",
    "simProtocol",
    "sumStatProgram",
    "sumStatArgs",
    "sumStatName",
    "doBoxCox",
    "linearCombName",
    "linearComb",
    "numLinearComb",
    "doBoosting",
    "numCaliSims",
    "thresholdProp",
    "rangeProp",
    "startingPoint",
    "mcmcSampling",
    "burnIn",
    "numChains",
    "maxCorSSFinder",
    "input",
    "output",
    "numComponents",
    "cvFolds",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    for q in ['\'', '"'] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

impl Config {
    /// Builds the configuration from command-line tokens. A leading token
    /// without `=` that names an existing file is read as the input file;
    /// every other token is `key=value` or a valueless flag. Command-line
    /// values override the file.
    pub fn from_args(args: &[String]) -> Result<Self> {
        let mut cfg = Config::default();
        let mut rest = args;
        if let Some(first) = args.first() {
            if !first.contains('=') && Path::new(first).is_file() {
                cfg.merge_file(Path::new(first))?;
                rest = &args[1..];
            }
        }
        for tok in rest {
            match tok.split_once('=') {
                Some((k, v)) => cfg.set(k.trim(), unquote(v)),
                None => cfg.set(tok.trim(), ""),
            }
        }
        Ok(cfg)
    }

    /// One `key value` pair per line; `//` and `#` start comments.
    pub fn parse_text(text: &str) -> Self {
        let mut cfg = Config::default();
        for line in text.lines() {
            let line = line.split("//").next().unwrap_or("");
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once(char::is_whitespace) {
                Some((k, v)) => cfg.set(k, unquote(v)),
                None => cfg.set(line, ""),
            }
        }
        cfg
    }

    fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        for (k, v) in Self::parse_text(&text).values {
            self.values.insert(k, v);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn unknown_keys(&self) -> Vec<&str> {
        self.values
            .keys()
            .map(String::as_str)
            .filter(|k| !KNOWN_KEYS.contains(k))
            .collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        match self.get(key) {
            Some(v) if !v.is_empty() => Ok(v),
            Some(_) => Err(Error::Config(format!("`{key}` needs a value"))),
            None => Err(Error::Config(format!("missing required setting `{key}`"))),
        }
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .trim()
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse `{key}` value `{v}`"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    pub fn require_parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        self.require(key)?;
        Ok(self.parse(key)?.expect("present"))
    }

    /// A valueless flag is true; otherwise `1`/`true`/`yes` or
    /// `0`/`false`/`no`.
    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key).map(|v| v.trim().to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "" | "1" | "true" | "yes" => Ok(true),
                "0" | "false" | "no" => Ok(false),
                _ => Err(Error::Config(format!("`{key}` expects 0 or 1, got `{v}`"))),
            },
        }
    }

    /// Semicolon-separated list, one entry per model.
    pub fn list(&self, key: &str) -> Result<Vec<String>> {
        Ok(self
            .require(key)?
            .split(';')
            .map(|s| unquote(s).to_string())
            .filter(|s| !s.is_empty())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("est.input");
        fs::write(
            &p,
            "task estimate\nsimName 'simNorm.txt'\nparams 1-2\nwriteRetained\n// comment\nmaxCor 1.0\n",
        )
        .unwrap();
        let c = Config::from_args(&args(&[p.to_str().unwrap(), "maxCor=0.5", "seed=3"])).unwrap();
        assert_eq!(c.get("task"), Some("estimate"));
        assert_eq!(c.get("simName"), Some("simNorm.txt"));
        assert!(c.flag("writeRetained", false).unwrap());
        assert_eq!(c.parse::<f64>("maxCor").unwrap(), Some(0.5));
        assert_eq!(c.parse::<u64>("seed").unwrap(), Some(3));
    }

    #[test]
    fn command_line_equals_file() {
        let a = Config::from_args(&args(&[
            "task=estimate",
            "simName=simNorm.txt",
            "params=1-2",
            "writeRetained",
            "maxCor=1.0",
        ]))
        .unwrap();
        let b = Config::parse_text("task estimate\nsimName simNorm.txt\nparams 1-2\nwriteRetained\nmaxCor 1.0\n");
        assert_eq!(a, b);
    }

    #[test]
    fn lists_flags_and_unknown() {
        let c = Config::parse_text("simName a.txt;'b.txt'\nfoo 1\ndoBoxCox 0\n");
        assert_eq!(c.list("simName").unwrap(), vec!["a.txt", "b.txt"]);
        assert_eq!(c.unknown_keys(), vec!["foo"]);
        assert!(!c.flag("doBoxCox", true).unwrap());
        assert!(c.flag("doBoosting", true).unwrap());
        assert!(c.require("numRetained").is_err());
        assert!(Config::parse_text("numRetained x\n").parse::<usize>("numRetained").is_err());
    }
}
