//! Grayscale images, overlapping patches and patch-based denoising.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::model::Dictionary;
use crate::numerics::Matrix;
use crate::sparse_coding::{omp_encode_all, OmpConfig, NORMALIZATION_TOL};
use crate::synth::Stream;

pub const PEAK: f64 = 255.0;
const TAG_IMAGE_NOISE: u64 = 0x494d_4e53;
const TAG_PATCHES: u64 = 0x5041_5443;

/// Row-major grayscale image.
///
/// Pixels read from disk lie in `[0, 255]`. Intermediate images (noisy
/// inputs in particular) may leave that range; writing clamps and rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Enforces `[0, 255]`.
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        let img = Self::unclamped(height, width, pixels)?;
        if let Some(v) = img.pixels.iter().find(|v| !(0.0..=PEAK).contains(*v)) {
            return Err(Error::Domain(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(img)
    }

    /// Accepts any finite values.
    pub fn unclamped(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Domain(format!("image size {height}x{width}")));
        }
        if pixels.len() != height * width {
            return Err(Error::dims(
                "GrayImage",
                format!("{} pixels for {height}x{width}", pixels.len()),
            ));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { height, width, pixels })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height * width).map(|k| f(k / width, k % width)).collect();
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    /// `height x width` matrix of the pixels.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_row_slice(self.height, self.width, &self.pixels)
    }

    pub fn clamped(&self) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|v| v.clamp(0.0, PEAK)).collect(),
        }
    }

    /// Parses binary PGM (`P5`, maxval 255).
    pub fn read_pgm<R: Read>(input: R) -> Result<Self> {
        let mut r = std::io::BufReader::new(input);
        let magic = pgm_token(&mut r)?;
        if magic != "P5" {
            return Err(Error::Parse(format!("expected P5 magic, found {magic:?}")));
        }
        let mut field = |name: &str| -> Result<usize> {
            let t = pgm_token(&mut r)?;
            t.parse().map_err(|_| Error::Parse(format!("bad PGM {name} {t:?}")))
        };
        let width = field("width")?;
        let height = field("height")?;
        let maxval = field("maxval")?;
        if maxval != 255 {
            return Err(Error::Parse(format!("PGM maxval {maxval}, only 255 is supported")));
        }
        // Exactly one whitespace byte separates the header from the raster;
        // pgm_token consumed it.
        let mut raster = vec![0u8; width * height];
        r.read_exact(&mut raster)
            .map_err(|e| Error::Parse(format!("truncated PGM raster: {e}")))?;
        Self::new(height, width, raster.into_iter().map(f64::from).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_pgm(std::fs::File::open(path)?)
    }

    /// Writes binary PGM, clamping to `[0, 255]` and rounding to integers.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let raster: Vec<u8> = self.pixels.iter().map(|v| v.clamp(0.0, PEAK).round() as u8).collect();
        out.write_all(&raster)?;
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_pgm(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Next whitespace-delimited header token, skipping `#` comments. Consumes
/// the single whitespace byte that ends the token.
fn pgm_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Parse("unexpected end of PGM header".into()));
        }
        match byte[0] {
            b'#' if token.is_empty() => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            b if b.is_ascii_whitespace() => {
                if !token.is_empty() {
                    break;
                }
            }
            b => token.push(b),
        }
    }
    String::from_utf8(token).map_err(|_| Error::Parse("non-ASCII PGM header".into()))
}

/// PSNR of `test` against `reference` with peak 255.
pub fn image_psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    psnr(&reference.to_matrix(), &test.to_matrix(), PEAK)
}

/// Adds i.i.d. `N(0, sigma^2)` noise without clamping.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("noise level {sigma}")));
    }
    let mut s = Stream::new(seed, TAG_IMAGE_NOISE);
    let pixels = img.pixels.iter().map(|v| v + sigma * s.gaussian()).collect();
    GrayImage::unclamped(img.height, img.width, pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchConfig {
    /// Side length; patches have `patch^2` pixels.
    pub patch: usize,
    pub stride: usize,
    /// Noise standard deviation assumed by [`denoise`].
    pub sigma: f64,
    /// OMP stops once the residual is at most `omp_error_gain * sigma * patch`.
    pub omp_error_gain: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            patch: 8,
            stride: 1,
            sigma: 0.0,
            omp_error_gain: 1.15,
        }
    }
}

impl PatchConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.patch == 0 || self.stride == 0 {
            return Err(Error::Config(format!(
                "patch {} and stride {} must be positive",
                self.patch, self.stride
            )));
        }
        if self.patch > height.min(width) {
            return Err(Error::Domain(format!(
                "patch {} larger than the {height}x{width} image",
                self.patch
            )));
        }
        if !(self.sigma >= 0.0) || !(self.omp_error_gain >= 0.0) {
            return Err(Error::Config(format!(
                "sigma {} and gain {} must be non-negative",
                self.sigma, self.omp_error_gain
            )));
        }
        Ok(())
    }

    /// Top-left corners along one axis of length `len`. The last position
    /// `len - patch` is always included so every pixel is covered.
    fn offsets(&self, len: usize) -> Vec<usize> {
        let last = len - self.patch;
        let mut v: Vec<usize> = (0..=last).step_by(self.stride).collect();
        if v.last() != Some(&last) {
            v.push(last);
        }
        v
    }

    /// Top-left corners in row-major order.
    pub fn corners(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        let cols = self.offsets(width);
        self.offsets(height)
            .into_iter()
            .flat_map(|r| cols.iter().map(move |&c| (r, c)))
            .collect()
    }
}

/// Mean-removed patches, one per column, with the removed means.
#[derive(Debug, Clone, PartialEq)]
pub struct Patches {
    pub columns: Matrix,
    pub means: Vec<f64>,
}

/// Column-major vector of the patch at `(r0, c0)`, before mean removal.
fn patch_vector(img: &GrayImage, p: usize, r0: usize, c0: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(p * p);
    for c in 0..p {
        for r in 0..p {
            v.push(img.get(r0 + r, c0 + c));
        }
    }
    v
}

fn remove_mean(v: &mut [f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    mean
}

pub fn extract_patches(img: &GrayImage, cfg: &PatchConfig) -> Result<Patches> {
    cfg.validate(img.height, img.width)?;
    let corners = cfg.corners(img.height, img.width);
    let m = cfg.patch * cfg.patch;
    let mut columns = Matrix::zeros(m, corners.len());
    let mut means = Vec::with_capacity(corners.len());
    for (j, &(r0, c0)) in corners.iter().enumerate() {
        let mut v = patch_vector(img, cfg.patch, r0, c0);
        means.push(remove_mean(&mut v));
        columns.column_mut(j).copy_from_slice(&v);
    }
    Ok(Patches { columns, means })
}

/// Averages overlapping patches (means restored) back into an image,
/// clamping to `[0, 255]` at the end.
pub fn reconstruct_from_patches(
    columns: &Matrix,
    means: &[f64],
    dims: (usize, usize),
    cfg: &PatchConfig,
) -> Result<GrayImage> {
    let (height, width) = dims;
    cfg.validate(height, width)?;
    let corners = cfg.corners(height, width);
    let p = cfg.patch;
    if columns.nrows() != p * p || columns.ncols() != corners.len() || means.len() != corners.len() {
        return Err(Error::dims(
            "reconstruct_from_patches",
            format!(
                "{}x{} patches and {} means, expected {}x{}",
                columns.nrows(),
                columns.ncols(),
                means.len(),
                p * p,
                corners.len()
            ),
        ));
    }
    let mut sum = vec![0.0; height * width];
    let mut count = vec![0u32; height * width];
    for (j, &(r0, c0)) in corners.iter().enumerate() {
        let col = columns.column(j);
        for c in 0..p {
            for r in 0..p {
                let k = (r0 + r) * width + c0 + c;
                sum[k] += col[c * p + r] + means[j];
                count[k] += 1;
            }
        }
    }
    let pixels = sum
        .iter()
        .zip(&count)
        .map(|(s, &n)| (s / f64::from(n)).clamp(0.0, PEAK))
        .collect();
    GrayImage::new(height, width, pixels)
}

/// Sparse-codes every patch of `img` over `d` with an error-bounded OMP and
/// averages the approximations.
pub fn denoise(img: &GrayImage, d: &Dictionary, cfg: &PatchConfig) -> Result<GrayImage> {
    let m = cfg.patch * cfg.patch;
    if d.m() != m {
        return Err(Error::dims(
            "denoise",
            format!("atoms of length {} for {m}-pixel patches", d.m()),
        ));
    }
    d.check_normalized(NORMALIZATION_TOL)?;
    let patches = extract_patches(img, cfg)?;
    let omp = OmpConfig {
        k: Some((m / 2).clamp(1, d.l())),
        residual_tol: Some(cfg.omp_error_gain * cfg.sigma * cfg.patch as f64),
    };
    let x = omp_encode_all(d, &patches.columns, &omp)?;
    let approx = d.atoms() * x.values();
    reconstruct_from_patches(&approx, &patches.means, (img.height, img.width), cfg)
}

/// `n` distinct mean-removed patches drawn uniformly from all stride-1
/// patch positions of `images`, so each image is chosen in proportion to
/// its patch count.
pub fn sample_training_patches(images: &[GrayImage], n: usize, patch: usize, seed: u64) -> Result<Matrix> {
    if images.is_empty() {
        return Err(Error::Config("no training images".into()));
    }
    if n == 0 {
        return Err(Error::Config("at least one training patch is needed".into()));
    }
    let cfg = PatchConfig {
        patch,
        ..PatchConfig::default()
    };
    let mut counts = Vec::with_capacity(images.len());
    for img in images {
        cfg.validate(img.height, img.width)?;
        counts.push((img.height - patch + 1) * (img.width - patch + 1));
    }
    let total: usize = counts.iter().sum();
    if n > total {
        return Err(Error::Config(format!(
            "{n} patches requested, only {total} positions exist"
        )));
    }
    let mut s = Stream::new(seed, TAG_PATCHES);
    let mut out = Matrix::zeros(patch * patch, n);
    for (j, mut idx) in s.sample_indices(total, n).into_iter().enumerate() {
        let mut which = 0;
        while idx >= counts[which] {
            idx -= counts[which];
            which += 1;
        }
        let img = &images[which];
        let across = img.width - patch + 1;
        let mut v = patch_vector(img, patch, idx / across, idx % across);
        remove_mean(&mut v);
        out.column_mut(j).copy_from_slice(&v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut s = Stream::new(seed, 1);
        GrayImage::from_fn(h, w, |_, _| 255.0 * s.uniform()).unwrap()
    }

    fn round_trip(img: &GrayImage, cfg: &PatchConfig) -> f64 {
        let p = extract_patches(img, cfg).unwrap();
        let back = reconstruct_from_patches(&p.columns, &p.means, (img.height(), img.width()), cfg).unwrap();
        (back.to_matrix() - img.to_matrix()).amax()
    }

    #[test]
    fn patch_counts() {
        let cfg = PatchConfig::default();
        assert_eq!(
            extract_patches(&random_image(8, 8, 1), &cfg).unwrap().columns.ncols(),
            1
        );
        assert_eq!(
            extract_patches(&random_image(9, 8, 1), &cfg).unwrap().columns.ncols(),
            2
        );
        assert!(extract_patches(&random_image(7, 9, 1), &cfg).is_err());
    }

    #[test]
    fn vectorization_is_column_major_and_mean_free() {
        let img = GrayImage::from_fn(2, 2, |r, c| (10 * r + c) as f64).unwrap();
        let cfg = PatchConfig {
            patch: 2,
            ..PatchConfig::default()
        };
        let p = extract_patches(&img, &cfg).unwrap();
        assert_eq!(p.means, vec![5.5]);
        let col: Vec<f64> = p.columns.column(0).iter().copied().collect();
        assert_eq!(col, vec![-5.5, 4.5, -4.5, 5.5]);
    }

    #[test]
    fn round_trips() {
        let cfg = PatchConfig::default();
        assert!(round_trip(&random_image(8, 8, 2), &cfg) < 1e-10);
        assert!(round_trip(&random_image(24, 19, 67), &cfg) < 1e-10);
        for stride in [2, 4, 8, 3] {
            let cfg = PatchConfig {
                stride,
                ..PatchConfig::default()
            };
            assert!(round_trip(&random_image(24, 16, 5), &cfg) < 1e-10, "stride {stride}");
        }
    }

    #[test]
    fn overlap_is_averaged() {
        let cfg = PatchConfig {
            patch: 2,
            ..PatchConfig::default()
        };
        // 2x3 image: two patches share the middle column.
        let cols = Matrix::from_column_slice(4, 2, &[0.0; 8]);
        let img = reconstruct_from_patches(&cols, &[10.0, 20.0], (2, 3), &cfg).unwrap();
        assert_eq!(img.pixels(), &[10.0, 15.0, 20.0, 10.0, 15.0, 20.0]);
        assert!(reconstruct_from_patches(&cols, &[1.0], (2, 3), &cfg).is_err());
    }

    #[test]
    fn reconstruction_clamps() {
        let cfg = PatchConfig {
            patch: 1,
            ..PatchConfig::default()
        };
        let img = reconstruct_from_patches(&Matrix::zeros(1, 2), &[-4.0, 300.0], (1, 2), &cfg).unwrap();
        assert_eq!(img.pixels(), &[0.0, 255.0]);
    }

    #[test]
    fn constant_image_is_denoised_by_mean_removal() {
        let img = GrayImage::from_fn(12, 12, |_, _| 77.0).unwrap();
        let d = crate::synth::random_dictionary(64, 80, 3, 1).unwrap().normalize().0;
        let out = denoise(&img, &d, &PatchConfig::with_sigma(10.0)).unwrap();
        assert!((out.to_matrix() - img.to_matrix()).amax() < 1e-12);
    }

    #[test]
    fn zero_noise_with_expressive_dictionary_is_exact() {
        // Mean-removed patches of a linear ramp span two directions.
        let smooth = GrayImage::from_fn(10, 11, |r, c| 100.0 + 3.0 * r as f64 + 2.0 * c as f64).unwrap();
        let cols = extract_patches(&smooth, &PatchConfig::default()).unwrap().columns;
        let basis = crate::numerics::svd(&cols).unwrap().u.columns(0, 2).into_owned();
        let out = denoise(&smooth, &Dictionary::new(basis).unwrap(), &PatchConfig::with_sigma(0.0)).unwrap();
        assert!(image_psnr(&smooth, &out).unwrap() > 200.0);
    }

    #[test]
    fn pgm_round_trip_and_comments() {
        let img = GrayImage::from_fn(3, 4, |r, c| (r * 4 + c) as f64 * 20.0).unwrap();
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert_eq!(GrayImage::read_pgm(&buf[..]).unwrap(), img);

        let mut commented = b"P5 # made by hand\n4 3\n# size above\n255\n".to_vec();
        commented.extend(img.pixels().iter().map(|&v| v as u8));
        assert_eq!(GrayImage::read_pgm(&commented[..]).unwrap(), img);
        assert!(GrayImage::read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(GrayImage::read_pgm(&b"P5\n2 2\n255\n\x01"[..]).is_err());
        assert!(GrayImage::read_pgm(&b"P5\n1 1\n65535\n\x00\x00"[..]).is_err());
    }

    #[test]
    fn pixel_bounds_on_construction() {
        assert!(GrayImage::new(1, 1, vec![256.0]).is_err());
        assert!(GrayImage::unclamped(1, 1, vec![256.0]).is_ok());
        assert!(GrayImage::new(1, 2, vec![0.0]).is_err());
    }

    #[test]
    fn sampling() {
        let imgs = [random_image(12, 12, 7), random_image(10, 9, 8)];
        let a = sample_training_patches(&imgs, 30, 8, 11).unwrap();
        assert_eq!(a.shape(), (64, 30));
        assert_eq!(a, sample_training_patches(&imgs, 30, 8, 11).unwrap());
        assert_eq!(sample_training_patches(&imgs, 1, 8, 11).unwrap().ncols(), 1);
        for col in a.column_iter() {
            assert!(col.sum().abs() < 1e-9);
        }
        assert!(sample_training_patches(&[], 1, 8, 1).is_err());
        assert!(sample_training_patches(&imgs, 1000, 8, 1).is_err());
    }

    #[test]
    fn noisy_psnr_matches_sigma() {
        let img = GrayImage::from_fn(128, 128, |r, c| ((r * 7 + c * 3) % 200 + 20) as f64).unwrap();
        let noisy = add_gaussian_noise(&img, 10.0, 3).unwrap();
        let expected = 20.0 * (255.0f64 / 10.0).log10();
        assert!((image_psnr(&img, &noisy).unwrap() - expected).abs() < 0.15);
    }
}
