use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, RunConfig};

/// Top-level report; field order is the key order on disk.
#[derive(Serialize)]
struct Report<'a, R: Serialize> {
    format_version: u32,
    command: &'a str,
    subject: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    result: &'a R,
}

/// Files of one run, held in memory until the run has succeeded.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn report<R: Serialize>(&mut self, cfg: &RunConfig, subject: &str, result: &R) -> anyhow::Result<()> {
        let report = Report {
            format_version: cfg.format_version,
            command: cfg.command,
            subject,
            config_hash: cfg.hash(),
            config: cfg,
            result,
        };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        self.add("report.json", text);
        Ok(())
    }

    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Write every file; the directory is only touched once all are ready.
    pub fn write_to(self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, contents) in self.files {
            let path = dir.join(&name);
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

/// CSV text with optional `# key=value` header lines.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(meta: &[(&str, String)], columns: &[&str]) -> Self {
        let mut text = String::new();
        for (k, v) in meta {
            let _ = writeln!(text, "# {k}={v}");
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn row_str(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Shortest round-trip text; exponent form for very small or large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Error kind and exit code.
pub fn classify_error(e: &anyhow::Error) -> (&'static str, u8) {
    if e.downcast_ref::<ConfigError>().is_some() {
        return ("config", 2);
    }
    if let Some(core) = e.downcast_ref::<qss_core::Error>() {
        return match core {
            qss_core::Error::Config(_) | qss_core::Error::UnknownCustom(_) => ("config", 2),
            _ => ("numerical", 1),
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() || e.chain().any(|c| c.is::<std::io::Error>()) {
        return ("io", 1);
    }
    ("internal", 1)
}

pub fn error_json(kind: &str, e: &anyhow::Error) -> String {
    let mut err = json!({ "kind": kind, "message": format!("{e:#}") });
    if let Some(core) = e.downcast_ref::<qss_core::Error>() {
        let debug = format!("{core:?}");
        let variant = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default();
        err["variant"] = json!(variant);
    }
    json!({ "error": err }).to_string()
}

/// One panel of a generated matplotlib script.
pub struct Plot<'a> {
    pub csv: &'a str,
    pub x: &'a str,
    pub ys: &'a [&'a str],
    /// Draw one line per distinct value of this column.
    pub group: Option<&'a str>,
    pub logx: bool,
    pub logy: bool,
    /// Markers only.
    pub points: bool,
    pub title: &'a str,
}

impl<'a> Plot<'a> {
    pub fn new(csv: &'a str, x: &'a str, ys: &'a [&'a str], title: &'a str) -> Self {
        Self { csv, x, ys, group: None, logx: false, logy: false, points: false, title }
    }

    pub fn group(mut self, col: &'a str) -> Self {
        self.group = Some(col);
        self
    }

    pub fn log(mut self, x: bool, y: bool) -> Self {
        self.logx = x;
        self.logy = y;
        self
    }

    pub fn points(mut self) -> Self {
        self.points = true;
        self
    }
}

pub fn plot_script(plots: &[Plot]) -> String {
    let mut s = String::from(
        "#!/usr/bin/env python3\n\
         # Generated by qss; run from this directory.\n\
         import csv\n\
         import matplotlib.pyplot as plt\n\n\
         def load(name):\n\
         \x20   with open(name) as fh:\n\
         \x20       rows = [line for line in fh if not line.startswith('#')]\n\
         \x20   return list(csv.DictReader(rows))\n\n",
    );
    let _ = writeln!(s, "fig, axes = plt.subplots(1, {}, figsize=({}, 4), squeeze=False)", plots.len(), 5 * plots.len());
    for (i, p) in plots.iter().enumerate() {
        let _ = writeln!(s, "ax = axes[0][{i}]");
        let _ = writeln!(s, "data = load({:?})", p.csv);
        let style = if p.points { "'o'" } else { "'-'" };
        for y in p.ys {
            match p.group {
                None => {
                    let _ = writeln!(
                        s,
                        "ax.plot([float(r[{x:?}]) for r in data], [float(r[{y:?}]) for r in data], {style}, label={y:?})",
                        x = p.x
                    );
                }
                Some(g) => {
                    let _ = writeln!(s, "for key in dict.fromkeys(r[{g:?}] for r in data):");
                    let _ = writeln!(s, "    part = [r for r in data if r[{g:?}] == key]");
                    let _ = writeln!(
                        s,
                        "    ax.plot([float(r[{x:?}]) for r in part], [float(r[{y:?}]) for r in part], {style}, label={y:?} + ' ' + {g:?} + '=' + key)",
                        x = p.x
                    );
                }
            }
        }
        if p.logx {
            s.push_str("ax.set_xscale('log')\n");
        }
        if p.logy {
            s.push_str("ax.set_yscale('log')\n");
        }
        let _ = writeln!(s, "ax.set_xlabel({:?})", p.x);
        let _ = writeln!(s, "ax.set_title({:?})", p.title);
        s.push_str("ax.legend()\n");
    }
    s.push_str("fig.tight_layout()\nfig.savefig('plot.png', dpi=150)\n");
    s
}
