//! External simulator programs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rand_chacha::ChaCha8Rng;

use super::Simulator;
use crate::error::{Error, Result};
use crate::io::ObservedStats;
use crate::prior::ParamDraw;

/// Token replaced by the rendered template's file name.
pub const SIM_INPUT_TOKEN: &str = "SIMINPUTNAME";
pub const DEFAULT_STATS_FILE: &str = "summary_stats-temp.txt";
const EASYABC_INPUT: &str = "input";
const EASYABC_OUTPUT: &str = "output";

#[derive(Debug, Clone, PartialEq)]
pub enum ExecMode {
    /// Parameter names in the argument string are replaced by values.
    Args,
    /// The template is rendered to `<stem>-temp.<ext>` in the working
    /// directory before each run.
    Template(PathBuf),
    /// Parameter values go to `input`, one per line; statistics are read
    /// from `output`.
    EasyAbc,
}

#[derive(Debug, Clone)]
pub struct ExecBinding {
    program: PathBuf,
    args: String,
    mode: ExecMode,
    post: Option<(PathBuf, String)>,
    stats_file: String,
}

fn is_executable(path: &Path) -> bool {
    let Ok(meta) = fs::metadata(path) else {
        return false;
    };
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        meta.is_file() && meta.permissions().mode() & 0o111 != 0
    }
    #[cfg(not(unix))]
    {
        meta.is_file()
    }
}

/// Absolute path of `program`: taken relative to the current directory
/// when it contains a path separator, else searched on `PATH`.
pub fn resolve_program(program: &str) -> Result<PathBuf> {
    let candidate = Path::new(program);
    let found = if candidate.components().count() > 1 || candidate.is_absolute() {
        Some(std::path::absolute(candidate).map_err(|e| Error::io(candidate, e))?)
    } else if is_executable(candidate) {
        Some(std::path::absolute(candidate).map_err(|e| Error::io(candidate, e))?)
    } else {
        std::env::var_os("PATH").and_then(|paths| {
            std::env::split_paths(&paths)
                .map(|d| d.join(program))
                .find(|p| is_executable(p))
        })
    };
    match found {
        Some(p) if is_executable(&p) => Ok(p),
        _ => Err(Error::Config(format!("simulator program `{program}` not found or not executable"))),
    }
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Replaces every whole token (a maximal run of ASCII letters, digits and
/// underscores) that names a parameter by its value, and `SIMINPUTNAME`
/// by `input_name` when given.
pub fn render_template(text: &str, draw: &ParamDraw, input_name: Option<&str>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        if token.is_empty() {
            return;
        }
        if let Some(v) = draw.get(token) {
            out.push_str(&format_value(v));
        } else if let (SIM_INPUT_TOKEN, Some(name)) = (token.as_str(), input_name) {
            out.push_str(name);
        } else {
            out.push_str(token);
        }
        token.clear();
    };
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            token.push(ch);
        } else {
            flush(&mut token, &mut out);
            out.push(ch);
        }
    }
    flush(&mut token, &mut out);
    out
}

fn rendered_name(template: &Path) -> String {
    let stem = template.file_stem().and_then(|s| s.to_str()).unwrap_or("sim");
    match template.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}-temp.{ext}"),
        None => format!("{stem}-temp"),
    }
}

fn run(program: &Path, args: &str, workdir: &Path) -> Result<()> {
    let out = Command::new(program)
        .args(args.split_whitespace())
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .output()
        .map_err(|e| Error::Simulator(format!("cannot start {}: {e}", program.display())))?;
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        let last = stderr.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
        return Err(Error::Simulator(format!(
            "{} exited with {}{}{}",
            program.display(),
            out.status,
            if last.is_empty() { "" } else { ": " },
            last.trim()
        )));
    }
    Ok(())
}

/// A header line of names and one line of values.
pub fn parse_stats_file(path: &Path) -> Result<ObservedStats> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::table(path, 1, "empty statistics file"))?
        .split_whitespace()
        .map(String::from)
        .collect();
    let values = lines
        .next()
        .ok_or_else(|| Error::table(path, 2, "statistics file has no value line"))?
        .split_whitespace()
        .map(|f| f.parse::<f64>().map_err(|_| Error::table(path, 2, format!("`{f}` is not a number"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != header.len() {
        return Err(Error::table(
            path,
            2,
            format!("{} names but {} values", header.len(), values.len()),
        ));
    }
    ObservedStats::new(header, values)
}

/// Whitespace-separated values with no header; names are `stat_1`,
/// `stat_2`, ... unless the first line is non-numeric, in which case it is
/// read as the header.
fn parse_easyabc_output(path: &Path) -> Result<ObservedStats> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.split_whitespace().any(|f| f.parse::<f64>().is_err()) {
        return parse_stats_file(path);
    }
    let values = text
        .split_whitespace()
        .map(|f| f.parse::<f64>().map_err(|_| Error::table(path, 1, format!("`{f}` is not a number"))))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::table(path, 1, "empty output file"));
    }
    let names = (1..=values.len()).map(|i| format!("stat_{i}")).collect();
    ObservedStats::new(names, values)
}

impl ExecBinding {
    /// Resolves and checks the programs and the template up front.
    pub fn new(
        program: &str,
        args: &str,
        mode: ExecMode,
        post: Option<(&str, &str)>,
        stats_file: Option<&str>,
    ) -> Result<Self> {
        let mode = match mode {
            ExecMode::Template(t) => {
                let abs = std::path::absolute(&t).map_err(|e| Error::io(&t, e))?;
                fs::metadata(&abs).map_err(|e| Error::io(&abs, e))?;
                ExecMode::Template(abs)
            }
            m => m,
        };
        Ok(Self {
            program: resolve_program(program)?,
            args: args.to_string(),
            mode,
            post: post
                .map(|(p, a)| resolve_program(p).map(|p| (p, a.to_string())))
                .transpose()?,
            stats_file: stats_file.unwrap_or(DEFAULT_STATS_FILE).to_string(),
        })
    }

    pub fn program(&self) -> &Path {
        &self.program
    }
}

impl Simulator for ExecBinding {
    fn simulate(&self, draw: &ParamDraw, workdir: &Path, _rng: &mut ChaCha8Rng) -> Result<ObservedStats> {
        let input_name = match &self.mode {
            ExecMode::Template(t) => {
                let text = fs::read_to_string(t).map_err(|e| Error::io(t, e))?;
                let name = rendered_name(t);
                let dest = workdir.join(&name);
                fs::write(&dest, render_template(&text, draw, None)).map_err(|e| Error::io(&dest, e))?;
                Some(name)
            }
            ExecMode::EasyAbc => {
                let dest = workdir.join(EASYABC_INPUT);
                let body: String = draw.values().iter().map(|v| format!("{}\n", format_value(*v))).collect();
                fs::write(&dest, body).map_err(|e| Error::io(&dest, e))?;
                let _ = fs::remove_file(workdir.join(EASYABC_OUTPUT));
                None
            }
            ExecMode::Args => None,
        };
        let stats_path = workdir.join(&self.stats_file);
        let _ = fs::remove_file(&stats_path);
        run(
            &self.program,
            &render_template(&self.args, draw, input_name.as_deref()),
            workdir,
        )?;
        if let Some((prog, args)) = &self.post {
            run(prog, &render_template(args, draw, input_name.as_deref()), workdir)?;
        }
        if self.mode == ExecMode::EasyAbc && self.post.is_none() {
            return parse_easyabc_output(&workdir.join(EASYABC_OUTPUT));
        }
        parse_stats_file(&stats_path)
    }
}
