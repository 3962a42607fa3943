//! Text correspondence files in pixel coordinates.
//!
//! ```text
//! # comment lines start with '#'
//! version 1
//! model linear-rs
//! intrinsics <fx> <fy> <cx> <cy>
//! size <width> <height>
//! <row1> <col1> <row2> <col2>
//! ...
//! ```
//!
//! `row` is the pixel row (the scanline, or the sweep time for push-broom data) and `col` the
//! pixel column. Normalized coordinates are `u = (row - cy) / fy`, `v = (col - cx) / fx`.

use std::fmt::Write as _;
use std::path::Path;

use rs_epipolar::{CameraModel, Correspondence, ImageBounds, ImagePoint};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn centered(focal: f64, width: u32, height: u32) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            width,
            height,
        }
    }

    pub fn normalize(&self, row: f64, col: f64) -> ImagePoint {
        ImagePoint::new((row - self.cy) / self.fy, (col - self.cx) / self.fx)
    }

    pub fn to_pixels(&self, p: &ImagePoint) -> (f64, f64) {
        (p.u * self.fy + self.cy, p.v * self.fx + self.cx)
    }

    /// The image rectangle in normalized coordinates.
    pub fn bounds(&self) -> ImageBounds {
        let a = self.normalize(0.0, 0.0);
        let b = self.normalize(f64::from(self.height), f64::from(self.width));
        ImageBounds {
            u_min: a.u,
            u_max: b.u,
            v_min: a.v,
            v_max: b.v,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let ok = [self.fx, self.fy].iter().all(|f| f.is_finite() && *f > 0.0)
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.width > 0
            && self.height > 0;
        if ok {
            Ok(())
        } else {
            Err(CliError::Parse("intrinsics must be finite with positive focal lengths and image size".into()))
        }
    }
}

/// Pixel rows `[row1, col1, row2, col2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceFile {
    pub model: CameraModel,
    pub intrinsics: Intrinsics,
    pub rows: Vec<[f64; 4]>,
}

impl CorrespondenceFile {
    pub fn from_normalized(model: CameraModel, intrinsics: Intrinsics, corrs: &[Correspondence]) -> Self {
        let rows = corrs
            .iter()
            .map(|c| {
                let (r1, c1) = intrinsics.to_pixels(&c.x1);
                let (r2, c2) = intrinsics.to_pixels(&c.x2);
                [r1, c1, r2, c2]
            })
            .collect();
        Self { model, intrinsics, rows }
    }

    pub fn correspondences(&self) -> Vec<Correspondence> {
        self.rows
            .iter()
            .map(|r| Correspondence::new(self.intrinsics.normalize(r[0], r[1]), self.intrinsics.normalize(r[2], r[3])))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut version = None;
        let mut model = None;
        let mut k = None;
        let mut size = None;
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| CliError::Parse(format!("line {}: {what}: `{line}`", lineno + 1));
            let mut fields = line.split_whitespace();
            let head = fields.next().expect("non-empty line");
            let numbers = |fields: std::str::SplitWhitespace, n: usize| -> Result<Vec<f64>, CliError> {
                let v: Vec<f64> = fields
                    .map(|f| f.parse::<f64>().map_err(|_| bad("bad number")))
                    .collect::<Result<_, _>>()?;
                if v.len() == n {
                    Ok(v)
                } else {
                    Err(bad(&format!("expected {n} numbers")))
                }
            };
            match head {
                "version" => {
                    let v: u32 = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad version"))?;
                    if v != FORMAT_VERSION {
                        return Err(bad("unsupported version"));
                    }
                    version = Some(v);
                }
                "model" => {
                    let name = fields.next().ok_or_else(|| bad("missing model"))?;
                    model = Some(name.parse::<CameraModel>().map_err(|_| bad("unknown model"))?);
                }
                "intrinsics" => k = Some(numbers(fields, 4)?),
                "size" => {
                    let v = numbers(fields, 2)?;
                    if v.iter().any(|x| x.fract() != 0.0 || *x < 1.0 || *x > f64::from(u32::MAX)) {
                        return Err(bad("image size must be positive integers"));
                    }
                    size = Some((v[0] as u32, v[1] as u32));
                }
                _ => {
                    let v = numbers(line.split_whitespace(), 4)?;
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(bad("non-finite coordinate"));
                    }
                    rows.push([v[0], v[1], v[2], v[3]]);
                }
            }
        }
        let missing = |what: &str| CliError::Parse(format!("missing `{what}` header line"));
        version.ok_or_else(|| missing("version"))?;
        let model = model.ok_or_else(|| missing("model"))?;
        let k = k.ok_or_else(|| missing("intrinsics"))?;
        let (width, height) = size.ok_or_else(|| missing("size"))?;
        let intrinsics = Intrinsics {
            fx: k[0],
            fy: k[1],
            cx: k[2],
            cy: k[3],
            width,
            height,
        };
        intrinsics.validate()?;
        if rows.is_empty() {
            return Err(CliError::Parse("no correspondence rows".into()));
        }
        Ok(Self { model, intrinsics, rows })
    }

    /// Serializes with 17 significant digits, so `parse(to_text())` reproduces every value.
    pub fn to_text(&self) -> String {
        let k = &self.intrinsics;
        let mut out = String::new();
        let _ = writeln!(out, "# rsepi correspondences: row1 col1 row2 col2 in pixels");
        let _ = writeln!(out, "version {FORMAT_VERSION}");
        let _ = writeln!(out, "model {}", self.model);
        let _ = writeln!(out, "intrinsics {:.16e} {:.16e} {:.16e} {:.16e}", k.fx, k.fy, k.cx, k.cy);
        let _ = writeln!(out, "size {} {}", k.width, k.height);
        for r in &self.rows {
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e} {:.16e}", r[0], r[1], r[2], r[3]);
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CorrespondenceFile {
        CorrespondenceFile {
            model: CameraModel::LinearRollingShutter,
            intrinsics: Intrinsics::centered(640.0, 640, 480),
            rows: vec![[1.0 / 3.0, 200.5, 0.1 + 0.2, 639.999_999_999_999_9], [12.0, 13.0, 14.0, 15.0]],
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let f = sample();
        let back = CorrespondenceFile::parse(&f.to_text()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_text(), f.to_text());
    }

    #[test]
    fn normalization_uses_rows_for_u() {
        let k = Intrinsics {
            fx: 100.0,
            fy: 200.0,
            cx: 50.0,
            cy: 40.0,
            width: 100,
            height: 80,
        };
        let p = k.normalize(240.0, 150.0);
        assert_eq!((p.u, p.v), (1.0, 1.0));
        assert_eq!(k.to_pixels(&p), (240.0, 150.0));
        let b = k.bounds();
        assert_eq!((b.u_min, b.u_max, b.v_min, b.v_max), (-0.2, 0.2, -0.5, 0.5));
    }

    #[test]
    fn malformed_files_are_rejected() {
        let good = sample().to_text();
        assert!(CorrespondenceFile::parse(&good.replace("version 1", "version 2")).is_err());
        assert!(CorrespondenceFile::parse(&good.replace("model linear-rs", "model fisheye")).is_err());
        assert!(CorrespondenceFile::parse(&good.replace("intrinsics 6.4", "intrinsics -6.4")).is_err());
        assert!(CorrespondenceFile::parse(&format!("{good}1 2 3\n")).is_err());
        let header_only: String = good.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(CorrespondenceFile::parse(&header_only).is_err());
    }
}
