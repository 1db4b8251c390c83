//! Noise corruptions, corruption-error metrics and shift consistency.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{evaluate, Classifier, Dataset};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const SEVERITIES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Shot,
    Impulse,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Gaussian, NoiseKind::Shot, NoiseKind::Impulse];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian_noise",
            NoiseKind::Shot => "shot_noise",
            NoiseKind::Impulse => "impulse_noise",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "gaussian_noise" => Ok(NoiseKind::Gaussian),
            "shot" | "shot_noise" => Ok(NoiseKind::Shot),
            "impulse" | "impulse_noise" => Ok(NoiseKind::Impulse),
            _ => Err(Error::InvalidConfig(format!("unknown noise kind '{s}'"))),
        }
    }
}

/// Per-severity corruption parameters: Gaussian standard deviation, shot-noise
/// photon count scale and impulse replacement fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeverityTable {
    pub gaussian: [f64; SEVERITIES],
    pub shot: [f64; SEVERITIES],
    pub impulse: [f64; SEVERITIES],
}

impl Default for SeverityTable {
    fn default() -> Self {
        Self {
            gaussian: [0.08, 0.12, 0.18, 0.26, 0.38],
            shot: [60.0, 25.0, 12.0, 5.0, 3.0],
            impulse: [0.03, 0.06, 0.09, 0.17, 0.27],
        }
    }
}

impl SeverityTable {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let table: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("invalid {what} severity parameters")));
        if self.gaussian.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return bad("gaussian");
        }
        if self.shot.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return bad("shot");
        }
        if self.impulse.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return bad("impulse");
        }
        Ok(())
    }

    pub fn param(&self, kind: NoiseKind, severity: u8) -> Result<f64> {
        if !(1..=SEVERITIES as u8).contains(&severity) {
            return Err(Error::BadSeverity(severity));
        }
        let row = match kind {
            NoiseKind::Gaussian => &self.gaussian,
            NoiseKind::Shot => &self.shot,
            NoiseKind::Impulse => &self.impulse,
        };
        Ok(row[severity as usize - 1])
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generator for image `index` of a run seeded with `seed`; independent of
/// how images are scheduled.
pub(crate) fn image_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn corrupt_values<T: Scalar>(values: &mut [T], kind: NoiseKind, param: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    match kind {
        NoiseKind::Gaussian => {
            let normal = Normal::new(0.0, param).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for v in values {
                *v = T::of(v.as_f64() + normal.sample(rng));
            }
        }
        NoiseKind::Shot => {
            for v in values {
                let lambda = v.as_f64().max(0.0) * param;
                let photons = if lambda > 0.0 {
                    Poisson::new(lambda).map_err(|e| Error::InvalidConfig(e.to_string()))?.sample(rng)
                } else {
                    0.0
                };
                *v = T::of(photons / param);
            }
        }
        NoiseKind::Impulse => {
            for v in values {
                if rng.random_bool(param) {
                    *v = if rng.random_bool(0.5) { T::one() } else { T::zero() };
                }
            }
        }
    }
    Ok(())
}

/// Corrupts every sample of `images` (leading axis) without clipping. Sample
/// `i` draws from its own stream, so any subset or ordering reproduces the
/// same pixels.
pub fn corrupt_raw<T: Scalar>(images: &Tensor<T>, kind: NoiseKind, severity: u8, table: &SeverityTable, seed: u64) -> Result<Tensor<T>> {
    let param = table.param(kind, severity)?;
    table.validate()?;
    let mut out = images.clone();
    if out.is_empty() {
        return Ok(out);
    }
    let per = out.len() / images.shape()[0].max(1);
    for (i, chunk) in out.data_mut().chunks_mut(per).enumerate() {
        corrupt_values(chunk, kind, param, &mut image_rng(seed, i as u64))?;
    }
    Ok(out)
}

/// [`corrupt_raw`] followed by clipping to `[0, 1]`.
pub fn corrupt<T: Scalar>(images: &Tensor<T>, kind: NoiseKind, severity: u8, table: &SeverityTable, seed: u64) -> Result<Tensor<T>> {
    Ok(corrupt_raw(images, kind, severity, table, seed)?.map(|v| v.max(T::zero()).min(T::one())))
}

/// Relative corruption error: `100 · Σ errors / Σ reference`.
pub fn corruption_error(errors: &[f64], reference: &[f64]) -> Result<f64> {
    if errors.len() != SEVERITIES || reference.len() != SEVERITIES {
        return Err(Error::shape(format!(
            "corruption error needs {SEVERITIES} severities, got {} and {}",
            errors.len(),
            reference.len()
        )));
    }
    let denom: f64 = reference.iter().sum();
    if denom <= 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(100.0 * errors.iter().sum::<f64>() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Noise,
    Blur,
    Weather,
    Digital,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Noise, Category::Blur, Category::Weather, Category::Digital];

    pub fn members(self) -> &'static [&'static str] {
        match self {
            Category::Noise => &["gaussian_noise", "shot_noise", "impulse_noise"],
            Category::Blur => &["defocus_blur", "glass_blur", "motion_blur", "zoom_blur"],
            Category::Weather => &["snow", "frost", "fog", "brightness"],
            Category::Digital => &["contrast", "elastic_transform", "pixelate", "jpeg_compression"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Noise => "noise",
            Category::Blur => "blur",
            Category::Weather => "weather",
            Category::Digital => "digital",
        }
    }

    /// Only the noise members have generators here; the others are scored
    /// from externally supplied error rows.
    pub fn generated(self) -> bool {
        self == Category::Noise
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown corruption category '{s}'")))
    }
}

/// Mean CE over the members of `category`.
pub fn mean_ce(ces: &BTreeMap<String, f64>, category: Category) -> Result<f64> {
    let missing: Vec<String> = category
        .members()
        .iter()
        .filter(|m| !ces.contains_key(**m))
        .map(|m| m.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCorruption(missing));
    }
    let members = category.members();
    Ok(members.iter().map(|m| ces[*m]).sum::<f64>() / members.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorRow {
    pub corruption: String,
    pub errors: [f64; SEVERITIES],
}

/// Top-1 error per corruption and severity for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorMatrix {
    pub model: String,
    pub rows: Vec<ErrorRow>,
}

impl ErrorMatrix {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            rows: Vec::new(),
        }
    }

    /// Adds or replaces the row for `corruption`.
    pub fn insert(&mut self, corruption: impl Into<String>, errors: [f64; SEVERITIES]) -> Result<()> {
        let corruption = corruption.into();
        if let Some(bad) = errors.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::InvalidConfig(format!("error rate {bad} for {corruption} is outside [0, 1]")));
        }
        match self.rows.iter_mut().find(|r| r.corruption == corruption) {
            Some(row) => row.errors = errors,
            None => self.rows.push(ErrorRow { corruption, errors }),
        }
        Ok(())
    }

    pub fn get(&self, corruption: &str) -> Option<&[f64; SEVERITIES]> {
        self.rows.iter().find(|r| r.corruption == corruption).map(|r| &r.errors)
    }

    pub fn validate(&self) -> Result<()> {
        let mut check = ErrorMatrix::new(self.model.clone());
        for row in &self.rows {
            if check.get(&row.corruption).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate row {}", row.corruption)));
            }
            check.insert(row.corruption.clone(), row.errors)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("corruption,s1,s2,s3,s4,s5\n");
        for row in &self.rows {
            s.push_str(&row.corruption);
            for e in row.errors {
                s.push_str(&format!(",{e}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(model: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "corruption,s1,s2,s3,s4,s5" => {}
            other => return Err(Error::format("error matrix CSV", format!("unexpected header {other:?}"))),
        }
        let mut m = ErrorMatrix::new(model);
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != SEVERITIES + 1 {
                return Err(Error::format("error matrix CSV", format!("expected 6 fields in '{line}'")));
            }
            let mut errors = [0.0; SEVERITIES];
            for (e, f) in errors.iter_mut().zip(&fields[1..]) {
                *e = f
                    .parse()
                    .map_err(|_| Error::format("error matrix CSV", format!("bad number '{f}'")))?;
            }
            if m.get(fields[0]).is_some() {
                return Err(Error::format("error matrix CSV", format!("duplicate row {}", fields[0])));
            }
            m.insert(fields[0], errors)?;
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Reads JSON or CSV, chosen by file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "csv") {
            let model = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Self::from_csv(model, &text)
        } else {
            Self::from_json(&text)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub corruption: String,
    pub errors: [f64; SEVERITIES],
    pub ce: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: Category,
    pub mce: f64,
    /// `"generated"` for corruptions produced here, `"external CE inputs only"`
    /// otherwise.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub model: String,
    pub rows: Vec<ReportRow>,
    pub categories: Vec<CategoryScore>,
    pub reference: ErrorMatrix,
}

impl RobustnessReport {
    /// CE for every corruption present in both matrices, and mCE for every
    /// category whose members all have a CE.
    pub fn build(errors: &ErrorMatrix, reference: &ErrorMatrix) -> Result<Self> {
        let mut rows = Vec::new();
        let mut ces = BTreeMap::new();
        for row in &errors.rows {
            if let Some(r) = reference.get(&row.corruption) {
                let ce = corruption_error(&row.errors, r)?;
                ces.insert(row.corruption.clone(), ce);
                rows.push(ReportRow {
                    corruption: row.corruption.clone(),
                    errors: row.errors,
                    ce,
                });
            }
        }
        let categories = Category::ALL
            .into_iter()
            .filter_map(|c| {
                mean_ce(&ces, c).ok().map(|mce| CategoryScore {
                    category: c,
                    mce,
                    source: if c.generated() { "generated" } else { "external CE inputs only" }.into(),
                })
            })
            .collect();
        Ok(Self {
            model: errors.model.clone(),
            rows,
            categories,
            reference: reference.clone(),
        })
    }

    pub fn mce(&self, category: Category) -> Option<f64> {
        self.categories.iter().find(|c| c.category == category).map(|c| c.mce)
    }

    /// One row per corruption, then one `mce_<category>` row per scored
    /// category with empty severity cells.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("corruption,s1,s2,s3,s4,s5,ce\n");
        for row in &self.rows {
            s.push_str(&row.corruption);
            for e in row.errors {
                s.push_str(&format!(",{e}"));
            }
            s.push_str(&format!(",{}\n", row.ce));
        }
        for c in &self.categories {
            s.push_str(&format!("mce_{},,,,,,{}\n", c.category.name(), c.mce));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mix(seed: u64, kind: NoiseKind, severity: u8) -> u64 {
    splitmix(seed ^ splitmix(((kind as u64) << 8) | severity as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEvalConfig {
    pub table: SeverityTable,
    pub seed: u64,
    pub threads: usize,
    /// Centre zero-padding applied after corruption, for models whose input
    /// is larger than the stored images.
    pub pad_to: Option<(usize, usize)>,
    pub kinds: Vec<NoiseKind>,
}

impl Default for NoiseEvalConfig {
    fn default() -> Self {
        Self {
            table: SeverityTable::default(),
            seed: 0,
            threads: 1,
            pad_to: None,
            kinds: NoiseKind::ALL.to_vec(),
        }
    }
}

/// Top-1 error of `model` on noisy copies of `data` at every severity.
pub fn evaluate_noise<T: Scalar, C: Classifier<T>>(model: &C, model_id: &str, data: &Dataset<T>, cfg: &NoiseEvalConfig) -> Result<ErrorMatrix> {
    let mut matrix = ErrorMatrix::new(model_id);
    for &kind in &cfg.kinds {
        let mut errors = [0.0; SEVERITIES];
        for (s, e) in errors.iter_mut().enumerate() {
            let severity = s as u8 + 1;
            let images = corrupt(&data.images, kind, severity, &cfg.table, mix(cfg.seed, kind, severity))?;
            let noisy = Dataset::new(images, data.labels.clone(), data.classes)?;
            let noisy = match cfg.pad_to {
                Some((h, w)) => noisy.pad_to(h, w)?,
                None => noisy,
            };
            *e = evaluate(model, &noisy, cfg.threads)?;
        }
        matrix.insert(kind.name(), errors)?;
    }
    Ok(matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSampling {
    /// Both shifts drawn uniformly from `[-range, range]²`.
    Random,
    /// One shift drawn per trial and used twice.
    Identical,
    /// The same listed `[(dy0, dx0), (dy1, dx1)]` pairs for every image.
    Explicit(Vec<[(i64, i64); 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTrialConfig {
    pub range: usize,
    pub pairs: usize,
    pub seed: u64,
    pub sampling: ShiftSampling,
    pub threads: usize,
    /// Centre zero-padding applied after shifting.
    pub pad_to: Option<(usize, usize)>,
}

impl Default for ShiftTrialConfig {
    fn default() -> Self {
        Self {
            range: 8,
            pairs: 64,
            seed: 0,
            sampling: ShiftSampling::Random,
            threads: 1,
            pad_to: None,
        }
    }
}

fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period.max(1));
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Moves the content of every `[H, W]` plane of one sample by `(dy, dx)`,
/// filling uncovered pixels by mirror reflection (edge pixel not repeated).
pub fn shift_image<T: Scalar>(sample: &[T], shape: [usize; 3], dy: i64, dx: i64) -> Vec<T> {
    let [c, h, w] = shape;
    let mut out = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let src = &sample[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            let sy = reflect(y as i64 - dy, h);
            for x in 0..w {
                dst[y * w + x] = src[sy * w + reflect(x as i64 - dx, w)];
            }
        }
    }
    out
}

/// Percentage of (image, shift pair) trials on which the predictions for the
/// two shifted copies agree.
pub fn shift_consistency<T: Scalar, C: Classifier<T>>(model: &C, data: &Dataset<T>, cfg: &ShiftTrialConfig) -> Result<f64> {
    if cfg.range == 0 || cfg.pairs == 0 {
        return Err(Error::InvalidConfig("shift range and pair count must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    let shape = data.sample_shape();
    let size = shape[1].min(shape[2]);
    let limit = size as i64 - 1;
    if cfg.range as i64 > limit {
        return Err(Error::ShiftOutOfRange {
            shift: cfg.range as i64,
            size,
        });
    }
    if let ShiftSampling::Explicit(pairs) = &cfg.sampling {
        if pairs.is_empty() {
            return Err(Error::InvalidConfig("explicit shift list is empty".into()));
        }
        for &(dy, dx) in pairs.iter().flatten() {
            if let Some(&s) = [dy, dx].iter().find(|s| s.abs() > cfg.range as i64) {
                return Err(Error::ShiftOutOfRange { shift: s, size });
            }
        }
    }
    let r = cfg.range as i64;
    let pairs_for = |index: usize| -> Vec<[(i64, i64); 2]> {
        let mut rng = image_rng(cfg.seed, index as u64);
        let mut draw = || (rng.random_range(-r..=r), rng.random_range(-r..=r));
        match &cfg.sampling {
            ShiftSampling::Random => (0..cfg.pairs).map(|_| [draw(), draw()]).collect(),
            ShiftSampling::Identical => (0..cfg.pairs)
                .map(|_| {
                    let s = draw();
                    [s, s]
                })
                .collect(),
            ShiftSampling::Explicit(p) => p.clone(),
        }
    };
    let per = shape.iter().product::<usize>();
    let agree_in = |indices: &[usize]| -> Result<(usize, usize)> {
        let mut agree = 0;
        let mut total = 0;
        for &i in indices {
            let sample = &data.images.data()[i * per..(i + 1) * per];
            let pairs = pairs_for(i);
            let mut batch = Vec::with_capacity(2 * pairs.len() * per);
            for pair in &pairs {
                for &(dy, dx) in pair {
                    batch.extend(shift_image(sample, shape, dy, dx));
                }
            }
            let batch = Tensor::new(vec![2 * pairs.len(), shape[0], shape[1], shape[2]], batch)?;
            let batch = match cfg.pad_to {
                Some((h, w)) => Dataset::new(batch, vec![0; 2 * pairs.len()], 1)?.pad_to(h, w)?.images,
                None => batch,
            };
            let pred = model.predict(&batch)?;
            agree += pred.chunks(2).filter(|p| p[0] == p[1]).count();
            total += pairs.len();
        }
        Ok((agree, total))
    };
    let indices: Vec<usize> = (0..data.len()).collect();
    let (agree, total) = if cfg.threads <= 1 {
        agree_in(&indices)?
    } else {
        let per_thread = indices.len().div_ceil(cfg.threads).max(1);
        std::thread::scope(|scope| {
            let handles: Vec<_> = indices.chunks(per_thread).map(|part| scope.spawn(move || agree_in(part))).collect();
            handles.into_iter().try_fold((0, 0), |(a, t), h| {
                let (pa, pt) = h.join().expect("shift worker panicked")?;
                Ok::<_, Error>((a + pa, t + pt))
            })
        })?
    };
    Ok(100.0 * agree as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_image(side: usize, v: f64) -> Tensor<f64> {
        Tensor::filled(&[1, 1, side, side], v)
    }

    #[test]
    fn severity_bounds() {
        let img = constant_image(4, 0.5);
        let t = SeverityTable::default();
        assert!(matches!(corrupt(&img, NoiseKind::Gaussian, 0, &t, 0), Err(Error::BadSeverity(0))));
        assert!(matches!(corrupt(&img, NoiseKind::Shot, 6, &t, 0), Err(Error::BadSeverity(6))));
    }

    #[test]
    fn zero_sigma_is_identity() {
        let table = SeverityTable {
            gaussian: [0.0; 5],
            ..SeverityTable::default()
        };
        let img = Tensor::from_fn(&[2, 1, 8, 8], |i| (i % 7) as f64 / 7.0);
        assert_eq!(corrupt(&img, NoiseKind::Gaussian, 2, &table, 1).unwrap(), img);
    }

    #[test]
    fn full_impulse_is_binary() {
        let table = SeverityTable {
            impulse: [1.0; 5],
            ..SeverityTable::default()
        };
        let out = corrupt(&constant_image(32, 0.5), NoiseKind::Impulse, 1, &table, 3).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn shift_moves_content() {
        let img: Vec<f64> = (0..16).map(f64::from).collect();
        let s = shift_image(&img, [1, 4, 4], 1, 0);
        assert_eq!(&s[4..8], &img[0..4]);
        assert_eq!(&s[0..4], &img[4..8]);
        assert_eq!(shift_image(&img, [1, 4, 4], 0, 0), img);
    }

    #[test]
    fn ce_and_mce_examples() {
        assert_eq!(corruption_error(&[0.3; 5], &[0.3; 5]).unwrap(), 100.0);
        assert!(matches!(corruption_error(&[0.3; 5], &[0.0; 5]), Err(Error::ZeroReference)));
        let ces: BTreeMap<String, f64> = [("gaussian_noise", 87.15), ("shot_noise", 88.47), ("impulse_noise", 91.30)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(format!("{:.2}", mean_ce(&ces, Category::Noise).unwrap()), "88.97");
        match mean_ce(&ces, Category::Blur) {
            Err(Error::MissingCorruption(m)) => assert_eq!(m.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_csv_round_trip() {
        let mut m = ErrorMatrix::new("baseline");
        m.insert("gaussian_noise", [0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        m.insert("snow", [0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert!(m.insert("fog", [1.5, 0.0, 0.0, 0.0, 0.0]).is_err());
        let back = ErrorMatrix::from_csv("baseline", &m.to_csv()).unwrap();
        assert_eq!(back, m);
        assert_eq!(ErrorMatrix::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn report_only_scores_shared_rows() {
        let mut f = ErrorMatrix::new("f");
        let mut r = ErrorMatrix::new("ref");
        for k in NoiseKind::ALL {
            f.insert(k.name(), [0.1; 5]).unwrap();
            r.insert(k.name(), [0.2; 5]).unwrap();
        }
        f.insert("fog", [0.1; 5]).unwrap();
        let rep = RobustnessReport::build(&f, &r).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!((rep.mce(Category::Noise).unwrap() - 50.0).abs() < 1e-12);
        assert!(rep.mce(Category::Weather).is_none());
        assert!(rep.to_csv().contains("mce_noise,,,,,,50"));
    }

    #[test]
    fn severity_table_json_rejects_unknown_keys() {
        assert!(serde_json::from_str::<SeverityTable>(r#"{"gaussian":[0,0,0,0,0]}"#).is_ok());
        assert!(serde_json::from_str::<SeverityTable>(r#"{"speckle":[0,0,0,0,0]}"#).is_err());
    }
}
