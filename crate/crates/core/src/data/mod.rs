//! Dataset ingestion, feature extraction and qubit encoding.

mod cache;
mod encoding;
mod idx;
mod image;
mod pca;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cache::{read_cache, write_cache, CACHE_MAGIC};
pub use encoding::{encode_feature, feature_density, feature_probabilities, EncodedSample};
pub use idx::{find_idx_file, load_idx, read_images, read_labels, RawDataset, Split, IMAGE_MAGIC, LABEL_MAGIC};
pub use image::compress_image;
pub use pca::Pca;

use crate::{Error, Result};

/// Original label (0-9) to binary class. `None` drops the class entirely,
/// which is how the two-digit subsets are expressed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGrouping {
    mapping: [Option<u8>; 10],
}

impl ClassGrouping {
    pub fn new(mapping: [Option<u8>; 10]) -> Result<Self> {
        if mapping.iter().flatten().any(|&c| c > 1) {
            return Err(Error::InvalidGrouping("classes must be 0 or 1".into()));
        }
        for class in 0..2 {
            if !mapping.contains(&Some(class)) {
                return Err(Error::InvalidGrouping(format!("class {class} is empty")));
            }
        }
        Ok(Self { mapping })
    }

    /// Even digits to class 0, odd digits to class 1.
    pub fn even_odd() -> Self {
        Self::new(std::array::from_fn(|d| Some((d % 2) as u8))).unwrap()
    }

    /// Fashion-MNIST: labels 0, 2, 3, 6, 9 to class 0, the rest to class 1.
    pub fn fashion() -> Self {
        Self::new(std::array::from_fn(|d| Some(u8::from(![0, 2, 3, 6, 9].contains(&d))))).unwrap()
    }

    /// Digits 3 and 5 only: 3 to class 0, 5 to class 1.
    pub fn three_vs_five() -> Self {
        let mut m = [None; 10];
        m[3] = Some(0);
        m[5] = Some(1);
        Self::new(m).unwrap()
    }

    /// Labels 0 and 1 kept as they are.
    pub fn identity() -> Self {
        let mut m = [None; 10];
        m[0] = Some(0);
        m[1] = Some(1);
        Self::new(m).unwrap()
    }

    pub fn from_kind(kind: GroupingKind) -> Self {
        match kind {
            GroupingKind::EvenOdd => Self::even_odd(),
            GroupingKind::Fashion => Self::fashion(),
            GroupingKind::ThreeFive => Self::three_vs_five(),
            GroupingKind::Identity => Self::identity(),
        }
    }

    /// True when every original label maps to a class.
    pub fn is_total(&self) -> bool {
        self.mapping.iter().all(Option::is_some)
    }

    pub fn class_of(&self, label: u8) -> Option<u8> {
        self.mapping.get(label as usize).copied().flatten()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingKind {
    EvenOdd,
    Fashion,
    ThreeFive,
    Identity,
}

impl GroupingKind {
    pub fn name(self) -> &'static str {
        match self {
            GroupingKind::EvenOdd => "even-odd",
            GroupingKind::Fashion => "fashion",
            GroupingKind::ThreeFive => "three-five",
            GroupingKind::Identity => "identity",
        }
    }
}

/// Relabels; dropped classes come back as `None`.
pub fn group_labels(labels: &[u8], grouping: &ClassGrouping) -> Vec<Option<u8>> {
    labels.iter().map(|&l| grouping.class_of(l)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Mnist,
    Kmnist,
    Fashion,
}

impl DatasetName {
    pub fn dir_name(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Kmnist => "kmnist",
            DatasetName::Fashion => "fashion",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// 8x8 resampled pixels, 64 features.
    Compressed,
    /// Eight principal components of the raw image.
    Pca,
}

/// Which data to load and how to split it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub dataset: DatasetName,
    pub grouping: GroupingKind,
    pub features: FeatureKind,
    pub train_size: usize,
    pub val_size: usize,
    /// `None` keeps every test sample that survives the grouping.
    pub test_size: Option<usize>,
    /// Seed of the train/validation shuffle.
    pub split_seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            dataset: DatasetName::Mnist,
            grouping: GroupingKind::EvenOdd,
            features: FeatureKind::Compressed,
            train_size: 50040,
            val_size: 9960,
            test_size: None,
            split_seed: 0,
        }
    }
}

impl DatasetSpec {
    /// The 3-vs-5 MNIST task with 5000/2000 train/validation samples and
    /// the full grouped test set (1902 images).
    pub fn mnist_three_five() -> Self {
        Self { grouping: GroupingKind::ThreeFive, train_size: 5000, val_size: 2000, ..Self::default() }
    }

    pub fn feature_count(&self) -> usize {
        match self.features {
            FeatureKind::Compressed => 64,
            FeatureKind::Pca => 8,
        }
    }

    /// Stable file-name stem for caches.
    pub fn stem(&self) -> String {
        format!(
            "{}-{}-{}-{}-{}-{}-s{}",
            self.dataset.dir_name(),
            self.grouping.name(),
            match self.features {
                FeatureKind::Compressed => "c8",
                FeatureKind::Pca => "pca8",
            },
            self.train_size,
            self.val_size,
            self.test_size.map_or_else(|| "all".to_string(), |t| t.to_string()),
            self.split_seed
        )
    }
}

/// Encoded train/validation/test splits.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedDataset {
    pub feature_count: usize,
    pub train: Vec<EncodedSample>,
    pub validation: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
}

impl PreparedDataset {
    pub fn split(&self, split: Split) -> &[EncodedSample] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    fn cache_path(dir: &Path, stem: &str, split: Split) -> PathBuf {
        let tag = match split {
            Split::Train => "train",
            Split::Validation => "val",
            Split::Test => "test",
        };
        dir.join(format!("{stem}.{tag}.bin"))
    }

    /// Writes one cache file per split; returns their paths.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        [Split::Train, Split::Validation, Split::Test]
            .into_iter()
            .map(|s| {
                let path = Self::cache_path(dir, stem, s);
                write_cache(&path, self.feature_count, self.split(s))?;
                Ok(path)
            })
            .collect()
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let (m, train) = read_cache(&Self::cache_path(dir, stem, Split::Train))?;
        let (mv, validation) = read_cache(&Self::cache_path(dir, stem, Split::Validation))?;
        let (mt, test) = read_cache(&Self::cache_path(dir, stem, Split::Test))?;
        if mv != m || mt != m {
            return Err(Error::Format(format!("cache splits disagree on feature count ({m}, {mv}, {mt})")));
        }
        Ok(Self { feature_count: m, train, validation, test })
    }
}

/// Reads the cached splits for `spec` from `cache_dir` if present, otherwise
/// prepares them from the IDX files and writes the cache.
pub fn load_or_prepare(spec: &DatasetSpec, data_dir: &Path, cache_dir: &Path) -> Result<PreparedDataset> {
    let stem = spec.stem();
    if PreparedDataset::cache_path(cache_dir, &stem, Split::Test).is_file() {
        return PreparedDataset::load(cache_dir, &stem);
    }
    let data = prepare(spec, data_dir)?;
    data.save(cache_dir, &stem)?;
    Ok(data)
}

fn load_pair(dir: &Path, prefix: &str, split: Split) -> Result<RawDataset> {
    let images = find_idx_file(dir, &format!("{prefix}-images-idx3-ubyte"))
        .ok_or_else(|| Error::InvalidDataset(format!("{prefix} images not found in {}", dir.display())))?;
    let labels = find_idx_file(dir, &format!("{prefix}-labels-idx1-ubyte"))
        .ok_or_else(|| Error::InvalidDataset(format!("{prefix} labels not found in {}", dir.display())))?;
    load_idx(&images, &labels, split)
}

/// Loads the IDX files under `<data_dir>/<dataset>/`, groups, splits and
/// encodes them.
///
/// Train and validation are the first `train_size` and next `val_size`
/// samples of the seeded shuffle of the grouped training file.
pub fn prepare(spec: &DatasetSpec, data_dir: &Path) -> Result<PreparedDataset> {
    let dir = data_dir.join(spec.dataset.dir_name());
    let dir = if dir.is_dir() { dir } else { data_dir.to_path_buf() };
    let train_raw = load_pair(&dir, "train", Split::Train)?;
    let test_raw = load_pair(&dir, "t10k", Split::Test)?;
    prepare_from_raw(spec, &train_raw, &test_raw)
}

pub fn prepare_from_raw(spec: &DatasetSpec, train_raw: &RawDataset, test_raw: &RawDataset) -> Result<PreparedDataset> {
    let grouping = ClassGrouping::from_kind(spec.grouping);
    let grouped = |ds: &RawDataset| -> Vec<(usize, u8)> {
        group_labels(&ds.labels, &grouping).into_iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c))).collect()
    };

    let mut pool = grouped(train_raw);
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.split_seed));
    let need = spec.train_size + spec.val_size;
    if pool.len() < need {
        return Err(Error::InvalidDataset(format!("{} grouped training samples, {} requested", pool.len(), need)));
    }
    let train_idx = &pool[..spec.train_size];
    let val_idx = &pool[spec.train_size..need];
    let mut test_idx = grouped(test_raw);
    if let Some(t) = spec.test_size {
        if t > test_idx.len() {
            return Err(Error::InvalidDataset(format!("{} test samples, {t} requested", test_idx.len())));
        }
        test_idx.truncate(t);
    }

    let to_unit = |img: &[u8]| img.iter().map(|&p| p as f64 / 255.0).collect::<Vec<f64>>();
    type Featurize = Box<dyn Fn(&[u8]) -> Vec<f64>>;
    let featurize: Featurize = match spec.features {
        FeatureKind::Compressed => {
            let (rows, cols) = (train_raw.rows, train_raw.cols);
            Box::new(move |img| compress_image(img, rows, cols, 8))
        }
        FeatureKind::Pca => {
            let rows: Vec<Vec<f64>> = train_idx.iter().map(|&(i, _)| to_unit(train_raw.image(i))).collect();
            let pca = Pca::fit(&rows, 8)?;
            Box::new(move |img| pca.transform(&to_unit(img)))
        }
    };
    let encode = |ds: &RawDataset, idx: &[(usize, u8)]| -> Result<Vec<EncodedSample>> {
        idx.iter().map(|&(i, c)| EncodedSample::new(featurize(ds.image(i)), c)).collect()
    };
    Ok(PreparedDataset {
        feature_count: spec.feature_count(),
        train: encode(train_raw, train_idx)?,
        validation: encode(train_raw, val_idx)?,
        test: encode(test_raw, &test_idx)?,
    })
}
