//! Buffered artifact emission. Files are rendered in memory and written only after the
//! command has finished, so a failing run leaves the output directory untouched.

use crate::config::{Format, RunConfig};
use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const TOOL_VERSION: &str = concat!("hyperdamp ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub config_sha256: String,
    pub command: String,
}

/// SHA-256 of the resolved configuration as JSON, ignoring where the output goes.
pub fn config_hash(config: &RunConfig) -> String {
    let mut c = config.clone();
    c.output.directory.clear();
    let json = serde_json::to_string(&c).expect("config serializes");
    format!("{:x}", Sha256::digest(json.as_bytes()))
}

pub struct Emitter {
    meta: Meta,
    formats: Vec<Format>,
    files: Vec<(String, Vec<u8>)>,
}

impl Emitter {
    pub fn new(config: &RunConfig, command: &str) -> Self {
        Self {
            meta: Meta {
                tool: TOOL_VERSION,
                config_sha256: config_hash(config),
                command: command.to_string(),
            },
            formats: config.output.formats.clone(),
            files: Vec::new(),
        }
    }

    fn header_line(&self) -> String {
        format!("{} config-sha256 {} command {}", self.meta.tool, self.meta.config_sha256, self.meta.command)
    }

    pub fn csv<R: AsRef<[String]>>(&mut self, name: &str, columns: &[&str], rows: &[R]) -> Result<()> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        let mut buf = format!("# {}\n", self.header_line()).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(columns)?;
            for r in rows {
                w.write_record(r.as_ref())?;
            }
            w.flush()?;
        }
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        #[derive(Serialize)]
        struct Doc<'a, T> {
            meta: &'a Meta,
            data: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Doc { meta: &self.meta, data })?;
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    pub fn svg(&mut self, name: &str, plot: &LinePlot) {
        if !self.formats.contains(&Format::Svg) {
            return;
        }
        let body = plot.render(&self.header_line());
        self.files.push((name.to_string(), body.into_bytes()));
    }

    pub fn text(&mut self, name: &str, body: &[u8]) {
        if !self.formats.contains(&Format::Txt) {
            return;
        }
        let mut buf = format!("# {}\n", self.header_line()).into_bytes();
        buf.extend_from_slice(body);
        self.files.push((name.to_string(), buf));
    }

    /// Writes every buffered file into `dir`, returning the paths written.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Shortest round-trip representation, so CSV values reproduce the computed doubles.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Minimal SVG line chart with linear axes.
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Vec<(f64, f64)>>,
    /// Vertical reference lines.
    pub markers: Vec<f64>,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f4e9c", "#c0392b", "#2e8b57", "#7d3c98"];

impl LinePlot {
    fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let pts = self.series.iter().flatten().filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return None;
        }
        if x1 - x0 < 1e-300 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-300 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        Some((x0, x1, y0, y1))
    }

    pub fn render(&self, comment: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "<!-- {comment} -->");
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let Some((x0, x1, y0, y1)) = self.bounds() else {
            s.push_str("</svg>\n");
            return s;
        };
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(fx), H - PAD + 16.0, tick(fx));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 4.0, sy(fy) + 4.0, tick(fy));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        );
        for &m in &self.markers {
            if m >= x0 && m <= x1 {
                let _ = writeln!(
                    s,
                    r##"<line x1="{0:.1}" y1="{PAD}" x2="{0:.1}" y2="{1}" stroke="#999" stroke-dasharray="3 3"/>"##,
                    sx(m),
                    H - PAD
                );
            }
        }
        for (i, series) in self.series.iter().enumerate() {
            // non-finite samples break the polyline
            let mut runs: Vec<Vec<String>> = vec![Vec::new()];
            for &(x, y) in series {
                if x.is_finite() && y.is_finite() {
                    runs.last_mut().unwrap().push(format!("{:.2},{:.2}", sx(x), sy(y)));
                } else if !runs.last().unwrap().is_empty() {
                    runs.push(Vec::new());
                }
            }
            for run in runs.iter().filter(|r| !r.is_empty()) {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    COLORS[i % COLORS.len()],
                    run.join(" ")
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, -1.5, 1e-300, std::f64::consts::PI, 6.02e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn svg_handles_gaps_and_empty() {
        let plot = LinePlot {
            title: "a<b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![vec![(0.0, 1.0), (1.0, f64::INFINITY), (2.0, 3.0), (3.0, 4.0)]],
            markers: vec![1.5],
        };
        let s = plot.render("hdr");
        assert!(s.starts_with("<!-- hdr -->"));
        assert!(s.contains("a&lt;b"));
        assert_eq!(s.matches("<polyline").count(), 2);
        let empty = LinePlot { series: vec![], markers: vec![], ..plot };
        assert!(empty.render("h").ends_with("</svg>\n"));
    }

    #[test]
    fn hash_changes_with_config() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.surface.refinement = 2;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
