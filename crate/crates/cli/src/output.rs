//! Run bookkeeping: data files, pass/fail checks, and the JSON manifest.
//!
//! The manifest is fully deterministic (config echo, tool version, section
//! tag, seed, per-check results, output list); wall time goes to stdout
//! only so reruns of the same configuration are byte-identical on disk.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

pub struct RunContext {
    out_dir: PathBuf,
    experiment: &'static str,
    section: &'static str,
    seed: u64,
    config: serde_json::Value,
    checks: Vec<CheckResult>,
    outputs: Vec<String>,
    started: Instant,
}

impl RunContext {
    pub fn new(
        out_dir: PathBuf,
        experiment: &'static str,
        section: &'static str,
        seed: u64,
        config: serde_json::Value,
    ) -> Self {
        Self {
            out_dir,
            experiment,
            section,
            seed,
            config,
            checks: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Write a data file into the output directory.
    pub fn write_file(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        fs::write(self.out_dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(CheckResult { name: name.to_string(), pass, detail });
    }

    /// Write the manifest, print the human summary, and return the exit
    /// status: 0 when every check passed, 1 otherwise.
    pub fn finish(mut self) -> std::io::Result<u8> {
        let manifest = serde_json::json!({
            "tool": "homnl",
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": self.experiment,
            "section": self.section,
            "seed": self.seed,
            "config": self.config,
            "checks": self.checks.iter().map(|c| serde_json::json!({
                "name": c.name,
                "pass": c.pass,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
            "outputs": self.outputs,
        });
        let text = format!("{}\n", serde_json::to_string_pretty(&manifest)?);
        fs::create_dir_all(&self.out_dir)?;
        fs::write(self.out_dir.join("manifest.json"), &text)?;
        self.outputs.push("manifest.json".to_string());

        println!("experiment {} (section {})", self.experiment, self.section);
        for out in &self.outputs {
            println!("wrote {}", self.out_dir.join(out).display());
        }
        let mut failed = None;
        for c in &self.checks {
            println!(
                "check {}: {} ({})",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.detail
            );
            if !c.pass && failed.is_none() {
                failed = Some(c.name.clone());
            }
        }
        println!("wall time: {} ms", self.started.elapsed().as_millis());
        if let Some(name) = failed {
            eprintln!("failing check: {name}");
            Ok(1)
        } else {
            Ok(0)
        }
    }
}
