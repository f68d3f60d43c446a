//! Feature-file container (FVF1), dataset manifests, and the synthetic
//! order-sensitive twin-class generator that stands in for a real backbone.
//!
//! Byte layouts are pinned in `docs/FORMATS.md`.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::tensor::{FeatureMap, NdArray, Precision, Real};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::Write as _;
use std::path::Path;

pub type ClassId = u32;

pub const FVF_MAGIC: [u8; 4] = *b"FVF1";
pub const FVF_VERSION: u16 = 1;

/// Feature tensor dimensions shared by every video in a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub n_t: usize,
    pub h_f: usize,
    pub w_f: usize,
    pub n_c: usize,
}

impl FeatureDims {
    pub fn volume(&self) -> usize {
        self.n_t * self.h_f * self.w_f * self.n_c
    }

    fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.h_f == 0 || self.w_f == 0 || self.n_c == 0 {
            return Err(Error::InvalidShape(format!(
                "dims must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// One class: a stable global id, a display name, and an optional link to
/// the order-reversed twin class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: ClassId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twin: Option<ClassId>,
}

/// One video: either a feature file on disk or a synthesis seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoEntry {
    pub id: String,
    pub class_id: ClassId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Parameters of the synthetic twin-class generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_class_pairs: usize,
    /// L: motifs per class; the twin class plays them in reverse order.
    pub motifs_per_class: usize,
    pub n_t: usize,
    pub h_f: usize,
    pub w_f: usize,
    pub n_c: usize,
    pub noise_sigma: f64,
    pub temporal_jitter: bool,
    pub spatial_jitter: bool,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn dims(&self) -> FeatureDims {
        FeatureDims {
            n_t: self.n_t,
            h_f: self.h_f,
            w_f: self.w_f,
            n_c: self.n_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims().validate()?;
        if self.num_class_pairs == 0 || self.samples_per_class == 0 {
            return Err(Error::Manifest(
                "synthetic spec needs at least one class pair and one sample".into(),
            ));
        }
        if self.motifs_per_class == 0 || self.motifs_per_class > self.n_t {
            return Err(Error::Manifest(format!(
                "motifs_per_class {} must be in 1..=n_t {}",
                self.motifs_per_class, self.n_t
            )));
        }
        if self.motifs_per_class > self.n_c {
            return Err(Error::Manifest(format!(
                "motifs_per_class {} exceeds n_c {} (orthogonality impossible)",
                self.motifs_per_class, self.n_c
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Manifest(
                "noise_sigma must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Dataset metadata: dims, classes with twin links, and video sources.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dims: FeatureDims,
    pub precision: Precision,
    pub classes: Vec<ClassEntry>,
    pub videos: Vec<VideoEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.classes.is_empty() {
            return Err(Error::Manifest("manifest has no classes".into()));
        }
        let mut class_ids = HashSet::new();
        for c in &self.classes {
            if !class_ids.insert(c.id) {
                return Err(Error::Manifest(format!("duplicate class id {}", c.id)));
            }
        }
        for c in &self.classes {
            if let Some(t) = c.twin {
                if t == c.id {
                    return Err(Error::Manifest(format!("class {} twins itself", c.id)));
                }
                let other =
                    self.classes.iter().find(|o| o.id == t).ok_or_else(|| {
                        Error::Manifest(format!("class {} twins missing {t}", c.id))
                    })?;
                if other.twin != Some(c.id) {
                    return Err(Error::Manifest(format!(
                        "twin link {} -> {t} is not symmetric",
                        c.id
                    )));
                }
            }
        }
        let mut video_ids = HashSet::new();
        for v in &self.videos {
            if !video_ids.insert(v.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate video id {:?}", v.id)));
            }
            if !class_ids.contains(&v.class_id) {
                return Err(Error::Manifest(format!(
                    "video {:?} references missing class {}",
                    v.id, v.class_id
                )));
            }
            match (&v.path, v.seed) {
                (Some(_), None) => {}
                (None, Some(_)) => {
                    if self.synthetic.is_none() {
                        return Err(Error::Manifest(format!(
                            "video {:?} is seed-based but the manifest has no synthetic spec",
                            v.id
                        )));
                    }
                }
                _ => {
                    return Err(Error::Manifest(format!(
                        "video {:?} must have exactly one of path or seed",
                        v.id
                    )));
                }
            }
        }
        if let Some(spec) = &self.synthetic {
            spec.validate()?;
            if spec.dims() != self.dims {
                return Err(Error::Manifest(
                    "synthetic spec dims disagree with manifest dims".into(),
                ));
            }
        }
        Ok(())
    }

    /// All class ids, sorted ascending.
    pub fn class_ids(&self) -> Vec<ClassId> {
        let mut ids: Vec<ClassId> = self.classes.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Video ids of one class, sorted ascending (manifest order must not
    /// leak into sampling).
    pub fn videos_of(&self, class: ClassId) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .videos
            .iter()
            .filter(|e| e.class_id == class)
            .map(|e| e.id.as_str())
            .collect();
        v.sort_unstable();
        v
    }

    pub fn video(&self, id: &str) -> Option<&VideoEntry> {
        self.videos.iter().find(|v| v.id == id)
    }

    pub fn global_label_of(&self, video_id: &str) -> Result<ClassId> {
        self.video(video_id)
            .map(|v| v.class_id)
            .ok_or_else(|| Error::Manifest(format!("unknown video id {video_id:?}")))
    }
}

// ---- FVF1 container --------------------------------------------------

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, offset: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Truncated {
                offset: self.offset as u64,
                needed: (self.offset + n - self.bytes.len()) as u64,
            });
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn checked_volume(dims: &FeatureDims) -> Result<usize> {
    (dims.n_t as u64)
        .checked_mul(dims.h_f as u64)
        .and_then(|v| v.checked_mul(dims.w_f as u64))
        .and_then(|v| v.checked_mul(dims.n_c as u64))
        .filter(|&v| v <= (1u64 << 40)) // keep payloads addressable
        .map(|v| v as usize)
        .ok_or_else(|| Error::DimensionOverflow(format!("{dims:?}")))
}

/// Serializes one feature map in the FVF1 layout.
pub fn encode_feature_map<R: Real>(fm: &FeatureMap<R>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + fm.values().len() * R::PRECISION.byte_width());
    out.extend_from_slice(&FVF_MAGIC);
    out.extend_from_slice(&FVF_VERSION.to_le_bytes());
    out.push(R::PRECISION.flag());
    out.push(0); // reserved
    for d in [fm.n_t(), fm.h_f(), fm.w_f(), fm.n_c()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in fm.values().data() {
        v.write_le(&mut out);
    }
    out
}

/// Parses the 24-byte FVF1 header, returning dims and stored precision.
pub fn decode_feature_header(bytes: &[u8]) -> Result<(FeatureDims, Precision)> {
    let mut r = ByteReader::new(bytes);
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != FVF_MAGIC {
        return Err(Error::BadMagic {
            found: magic,
            expected: FVF_MAGIC,
        });
    }
    let version = r.u16()?;
    if version != FVF_VERSION {
        return Err(Error::BadVersion {
            found: version,
            expected: FVF_VERSION,
        });
    }
    let precision = Precision::from_flag(r.u8()?)?;
    let _reserved = r.u8()?;
    let dims = FeatureDims {
        n_t: r.u32()? as usize,
        h_f: r.u32()? as usize,
        w_f: r.u32()? as usize,
        n_c: r.u32()? as usize,
    };
    dims.validate()?;
    Ok((dims, precision))
}

/// Parses a full FVF1 buffer into the requested working precision.
/// Widening (f32 file into f64) is exact; narrowing rounds.
pub fn decode_feature_map<R: Real>(bytes: &[u8]) -> Result<FeatureMap<R>> {
    let (dims, precision) = decode_feature_header(bytes)?;
    let n = checked_volume(&dims)?;
    let width = precision.byte_width();
    let mut r = ByteReader::new(bytes);
    r.take(24)?; // header re-skip
    let payload = r.take(n * width)?;
    let shape = [dims.n_t, dims.h_f, dims.w_f, dims.n_c];
    let values = match precision {
        Precision::F32 => {
            let arr = NdArray::<f32>::from_vec(
                &shape,
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )?;
            arr.cast::<R>()
        }
        Precision::F64 => {
            let arr = NdArray::<f64>::from_vec(
                &shape,
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )?;
            arr.cast::<R>()
        }
    };
    FeatureMap::new(values)
}

pub fn write_feature_file<R: Real>(path: &Path, fm: &FeatureMap<R>) -> Result<()> {
    let bytes = encode_feature_map(fm);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_feature_file<R: Real>(path: &Path) -> Result<FeatureMap<R>> {
    let bytes = std::fs::read(path)?;
    decode_feature_map(&bytes)
}

pub fn read_feature_header(path: &Path) -> Result<(FeatureDims, Precision)> {
    let bytes = std::fs::read(path)?;
    decode_feature_header(&bytes)
}

// ---- manifest IO -----------------------------------------------------

pub fn save_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    manifest.validate()?;
    let mut json = serde_json::to_string_pretty(manifest)?;
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

/// Loads and validates a manifest; file-backed videos must exist with
/// headers matching the manifest dims and precision.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    manifest.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for v in &manifest.videos {
        if let Some(rel) = &v.path {
            let fpath = base.join(rel);
            let (dims, precision) = read_feature_header(&fpath).map_err(|e| match e {
                Error::Io(io) => Error::Manifest(format!(
                    "feature file {} for video {:?}: {io}",
                    fpath.display(),
                    v.id
                )),
                other => other,
            })?;
            if dims != manifest.dims {
                return Err(Error::Manifest(format!(
                    "video {:?} header dims {dims:?} disagree with manifest {:?}",
                    v.id, manifest.dims
                )));
            }
            if precision != manifest.precision {
                return Err(Error::Manifest(format!(
                    "video {:?} stored as {precision}, manifest says {}",
                    v.id, manifest.precision
                )));
            }
        }
    }
    Ok(manifest)
}

// ---- synthetic generator ----------------------------------------------

/// Draws L orthonormal motif vectors in R^{n_c} by Gram-Schmidt over seeded
/// Gaussian draws (all in f64).
pub fn draw_motifs(n_c: usize, l: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut motifs: Vec<Vec<f64>> = Vec::with_capacity(l);
    while motifs.len() < l {
        let mut v: Vec<f64> = (0..n_c).map(|_| rng.gaussian()).collect();
        for m in &motifs {
            let dot: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(m) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue; // essentially impossible; redraw keeps the stream total
        }
        for x in &mut v {
            *x /= norm;
        }
        motifs.push(v);
    }
    motifs
}

/// Frame-to-motif assignment for one video.
///
/// Jitter on: L-1 distinct cut points stretch the motifs monotonically over
/// all n_t frames (every frame carries a motif). Jitter off: motif k sits
/// alone at 1-based frame `ceil(k * n_t / L)`; other frames carry none.
fn compose_timeline(spec: &SyntheticSpec, rng: &mut Rng) -> Vec<Option<usize>> {
    let (n_t, l) = (spec.n_t, spec.motifs_per_class);
    if spec.temporal_jitter {
        let cuts: Vec<usize> = rng
            .sample_distinct(n_t - 1, l - 1)
            .into_iter()
            .map(|c| c + 1)
            .collect();
        let mut timeline = vec![None; n_t];
        let mut block = 0usize;
        for (t, slot) in timeline.iter_mut().enumerate() {
            while block < cuts.len() && t >= cuts[block] {
                block += 1;
            }
            *slot = Some(block);
        }
        timeline
    } else {
        let mut timeline = vec![None; n_t];
        for k in 1..=l {
            let frame = (k * n_t).div_ceil(l); // 1-based
            timeline[frame - 1] = Some(k - 1);
        }
        timeline
    }
}

/// Generates one video's feature map (f64; cast to the run precision by the
/// caller). RNG consumption order is pinned: (1) temporal cuts if jitter is
/// on, (2) per motif-carrying frame in t order, two bounded draws for the
/// cell if spatial jitter is on, (3) one gaussian per (t,h,w,c) cell in
/// row-major order if sigma > 0.
pub fn synthesize_video(
    spec: &SyntheticSpec,
    motifs: &[Vec<f64>],
    reversed: bool,
    video_seed: u64,
) -> Result<FeatureMap<f64>> {
    spec.validate()?;
    let mut rng = Rng::new(video_seed);
    let timeline = compose_timeline(spec, &mut rng);
    let (h, w, c) = (spec.h_f, spec.w_f, spec.n_c);

    let mut cells = vec![(0usize, 0usize); spec.n_t];
    for (t, slot) in timeline.iter().enumerate() {
        if slot.is_some() && spec.spatial_jitter {
            cells[t] = (
                rng.bounded(h as u64) as usize,
                rng.bounded(w as u64) as usize,
            );
        }
    }

    let shape = [spec.n_t, h, w, c];
    let mut values = if spec.noise_sigma > 0.0 {
        let sigma = spec.noise_sigma;
        NdArray::from_fn(&shape, |_| sigma * rng.gaussian())
    } else {
        NdArray::zeros(&shape)
    };

    let l = spec.motifs_per_class;
    for (t, slot) in timeline.iter().enumerate() {
        if let Some(block) = slot {
            let motif = &motifs[if reversed { l - 1 - block } else { *block }];
            let (ci, cj) = cells[t];
            for (ch, &mv) in motif.iter().enumerate() {
                let idx = [t, ci, cj, ch];
                values.set(&idx, values.get(&idx) + mv);
            }
        }
    }
    FeatureMap::new(values)
}

fn class_name(pair: usize, reversed: bool) -> String {
    format!("pair{pair:02}_{}", if reversed { "rev" } else { "fwd" })
}

fn video_id(class: ClassId, sample: usize) -> String {
    format!("c{class:03}_s{sample:03}")
}

/// Seed for one video's synthesis stream, derived from the master seed and
/// the video id (so generation is order-independent and parallelizable).
pub fn video_seed(master: u64, video_id: &str) -> u64 {
    derive_seed(master, &format!("video/{video_id}"))
}

/// Motif stream seed for one class pair.
pub fn pair_seed(master: u64, pair: usize) -> u64 {
    derive_seed(master, &format!("motifs/pair{pair}"))
}

/// Builds the manifest of a synthetic dataset with seed-based videos (no
/// files written); the provider regenerates features on load.
pub fn build_synthetic_manifest(
    spec: &SyntheticSpec,
    precision: Precision,
) -> Result<DatasetManifest> {
    spec.validate()?;
    let mut classes = Vec::new();
    let mut videos = Vec::new();
    for pair in 0..spec.num_class_pairs {
        let fwd = (2 * pair) as ClassId;
        let rev = (2 * pair + 1) as ClassId;
        classes.push(ClassEntry {
            id: fwd,
            name: class_name(pair, false),
            twin: Some(rev),
        });
        classes.push(ClassEntry {
            id: rev,
            name: class_name(pair, true),
            twin: Some(fwd),
        });
        for class in [fwd, rev] {
            for s in 0..spec.samples_per_class {
                let id = video_id(class, s);
                let seed = video_seed(spec.seed, &id);
                videos.push(VideoEntry {
                    id,
                    class_id: class,
                    path: None,
                    seed: Some(seed),
                });
            }
        }
    }
    let manifest = DatasetManifest {
        dims: spec.dims(),
        precision,
        classes,
        videos,
        synthetic: Some(spec.clone()),
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Generates the dataset on disk: FVF1 feature files under
/// `dir/features/` plus `dir/manifest.json`. Returns the manifest.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    precision: Precision,
    dir: &Path,
    force: bool,
) -> Result<DatasetManifest> {
    let mut manifest = build_synthetic_manifest(spec, precision)?;
    let feat_dir = dir.join("features");
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() && !force {
        return Err(Error::Manifest(format!(
            "{} already exists (use --force to overwrite)",
            manifest_path.display()
        )));
    }
    std::fs::create_dir_all(&feat_dir)?;

    let mut motif_cache: HashMap<usize, Vec<Vec<f64>>> = HashMap::new();
    for v in &mut manifest.videos {
        let pair = (v.class_id / 2) as usize;
        let reversed = v.class_id % 2 == 1;
        let motifs = motif_cache.entry(pair).or_insert_with(|| {
            let mut rng = Rng::new(pair_seed(spec.seed, pair));
            draw_motifs(spec.n_c, spec.motifs_per_class, &mut rng)
        });
        let fm64 = synthesize_video(spec, motifs, reversed, v.seed.expect("seed set"))?;
        let rel = format!("features/{}.fvf", v.id);
        let fpath = dir.join(&rel);
        match precision {
            Precision::F32 => {
                let fm = FeatureMap::new(fm64.values().cast::<f32>())?;
                write_feature_file(&fpath, &fm)?;
            }
            Precision::F64 => write_feature_file(&fpath, &fm64)?,
        }
        v.path = Some(rel);
        v.seed = None;
    }
    save_manifest(&manifest_path, &manifest)?;
    Ok(manifest)
}

/// Eagerly loaded feature store: every manifest video resolved to a feature
/// map in the working precision, whether file-backed or seed-based.
#[derive(Debug)]
pub struct FeatureProvider<R> {
    pub dims: FeatureDims,
    features: HashMap<String, FeatureMap<R>>,
}

impl<R: Real> FeatureProvider<R> {
    pub fn load(manifest: &DatasetManifest, base_dir: &Path) -> Result<Self> {
        manifest.validate()?;
        let mut features = HashMap::with_capacity(manifest.videos.len());
        let mut motif_cache: HashMap<usize, Vec<Vec<f64>>> = HashMap::new();
        for v in &manifest.videos {
            let fm: FeatureMap<R> = match (&v.path, v.seed) {
                (Some(rel), None) => {
                    let fm = read_feature_file::<R>(&base_dir.join(rel))?;
                    if fm.n_t() != manifest.dims.n_t
                        || fm.h_f() != manifest.dims.h_f
                        || fm.w_f() != manifest.dims.w_f
                        || fm.n_c() != manifest.dims.n_c
                    {
                        return Err(Error::Manifest(format!(
                            "video {:?} dims disagree with manifest",
                            v.id
                        )));
                    }
                    fm
                }
                (None, Some(seed)) => {
                    let spec = manifest
                        .synthetic
                        .as_ref()
                        .ok_or_else(|| Error::Manifest("seed video without spec".into()))?;
                    let pair = (v.class_id / 2) as usize;
                    let reversed = v.class_id % 2 == 1;
                    let motifs = motif_cache.entry(pair).or_insert_with(|| {
                        let mut rng = Rng::new(pair_seed(spec.seed, pair));
                        draw_motifs(spec.n_c, spec.motifs_per_class, &mut rng)
                    });
                    let fm64 = synthesize_video(spec, motifs, reversed, seed)?;
                    // Cast through the manifest precision first so seed-based
                    // features are bit-identical to file-backed ones.
                    match manifest.precision {
                        Precision::F32 => FeatureMap::new(fm64.values().cast::<f32>().cast::<R>())?,
                        Precision::F64 => FeatureMap::new(fm64.values().cast::<R>())?,
                    }
                }
                _ => return Err(Error::Manifest(format!("video {:?} source invalid", v.id))),
            };
            features.insert(v.id.clone(), fm);
        }
        Ok(FeatureProvider {
            dims: manifest.dims,
            features,
        })
    }

    pub fn get(&self, video_id: &str) -> Result<&FeatureMap<R>> {
        self.features
            .get(video_id)
            .ok_or_else(|| Error::Manifest(format!("unknown video id {video_id:?}")))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Convenience used by tests and the trainer: manifest + in-memory provider
/// for a synthetic spec.
pub fn synthetic_provider<R: Real>(
    spec: &SyntheticSpec,
    precision: Precision,
) -> Result<(DatasetManifest, FeatureProvider<R>)> {
    let manifest = build_synthetic_manifest(spec, precision)?;
    let provider = FeatureProvider::load(&manifest, Path::new("."))?;
    Ok((manifest, provider))
}

/// Default spec used by examples and the acceptance dataset: 4 twin pairs,
/// L=4 motifs over n_t=8 frames on a 3x3 grid with 32 channels.
pub fn default_synthetic_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        num_class_pairs: 4,
        motifs_per_class: 4,
        n_t: 8,
        h_f: 3,
        w_f: 3,
        n_c: 32,
        noise_sigma: 0.05,
        temporal_jitter: true,
        spatial_jitter: true,
        samples_per_class: 20,
        seed,
    }
}
