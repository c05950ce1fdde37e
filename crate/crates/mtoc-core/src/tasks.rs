//! Binary classification tasks over 10-class datasets.
//!
//! A task is a set of positive classes; the positive class is index 1 of the
//! decoder's two-way output.

use core::fmt;
use core::str::FromStr;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Mnist,
    FashionMnist,
    Cifar10,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] = [
        DatasetName::Mnist,
        DatasetName::FashionMnist,
        DatasetName::Cifar10,
    ];

    /// Canonical class order of the dataset.
    pub fn class_names(self) -> [&'static str; NUM_CLASSES] {
        match self {
            DatasetName::Mnist => ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"],
            DatasetName::FashionMnist => [
                "T-shirt/top",
                "Trouser",
                "Pullover",
                "Dress",
                "Coat",
                "Sandal",
                "Shirt",
                "Sneaker",
                "Bag",
                "Ankle boot",
            ],
            DatasetName::Cifar10 => [
                "airplane",
                "automobile",
                "bird",
                "cat",
                "deer",
                "dog",
                "frog",
                "horse",
                "ship",
                "truck",
            ],
        }
    }

    /// Case-insensitive lookup of a class name.
    pub fn class_index(self, name: &str) -> Option<usize> {
        self.class_names()
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
    }

    pub fn key(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion",
            DatasetName::Cifar10 => "cifar10",
        }
    }

    /// Per-sample image shape `[H, W, C]`.
    pub fn image_shape(self) -> [usize; 3] {
        match self {
            DatasetName::Mnist | DatasetName::FashionMnist => [28, 28, 1],
            DatasetName::Cifar10 => [32, 32, 3],
        }
    }

    /// Official (train, test) sizes.
    pub fn split_sizes(self) -> (usize, usize) {
        match self {
            DatasetName::Mnist | DatasetName::FashionMnist => (60_000, 10_000),
            DatasetName::Cifar10 => (50_000, 10_000),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion" | "fashion-mnist" | "fashion_mnist" | "fashionmnist" => {
                Ok(DatasetName::FashionMnist)
            }
            "cifar10" | "cifar-10" | "cifar" => Ok(DatasetName::Cifar10),
            other => Err(Error::input(format!("unknown dataset `{other}`"))),
        }
    }
}

/// Subset of `{0, ..., 9}` as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassSet(u16);

impl ClassSet {
    const FULL: u16 = (1 << NUM_CLASSES) - 1;

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut bits = 0u16;
        for &i in indices {
            if i >= NUM_CLASSES {
                return Err(Error::input(format!("class {i} out of range")));
            }
            bits |= 1 << i;
        }
        Ok(ClassSet(bits))
    }

    pub fn contains(self, class: usize) -> bool {
        class < NUM_CLASSES && self.0 & (1 << class) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self) -> Self {
        ClassSet(!self.0 & Self::FULL)
    }

    pub fn indices(self) -> Vec<usize> {
        (0..NUM_CLASSES).filter(|&c| self.contains(c)).collect()
    }

    /// Nonempty and not every class.
    pub fn is_proper(self) -> bool {
        self.0 != 0 && self.0 != Self::FULL
    }
}

/// The six two-receiver tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedTask {
    /// Odd digits.
    MnistParity,
    /// Digits 5 and above.
    MnistMagnitude,
    FashionDress,
    FashionFormal,
    CifarAnimals,
    CifarGround,
}

impl NamedTask {
    pub const ALL: [NamedTask; 6] = [
        NamedTask::MnistParity,
        NamedTask::MnistMagnitude,
        NamedTask::FashionDress,
        NamedTask::FashionFormal,
        NamedTask::CifarAnimals,
        NamedTask::CifarGround,
    ];

    pub fn dataset(self) -> DatasetName {
        match self {
            NamedTask::MnistParity | NamedTask::MnistMagnitude => DatasetName::Mnist,
            NamedTask::FashionDress | NamedTask::FashionFormal => DatasetName::FashionMnist,
            NamedTask::CifarAnimals | NamedTask::CifarGround => DatasetName::Cifar10,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            NamedTask::MnistParity => "mnist.parity",
            NamedTask::MnistMagnitude => "mnist.magnitude",
            NamedTask::FashionDress => "fashion.dress",
            NamedTask::FashionFormal => "fashion.formal",
            NamedTask::CifarAnimals => "cifar10.animals",
            NamedTask::CifarGround => "cifar10.ground",
        }
    }

    /// Positive classes by name.
    pub fn positive_names(self) -> &'static [&'static str] {
        match self {
            NamedTask::MnistParity => &["1", "3", "5", "7", "9"],
            NamedTask::MnistMagnitude => &["5", "6", "7", "8", "9"],
            NamedTask::FashionDress => &[
                "T-shirt/top",
                "Trouser",
                "Pullover",
                "Dress",
                "Coat",
                "Shirt",
            ],
            NamedTask::FashionFormal => &["Trouser", "Dress", "Sandal", "Shirt", "Bag"],
            NamedTask::CifarAnimals => &["bird", "cat", "deer", "dog", "frog", "horse"],
            NamedTask::CifarGround => &["automobile", "cat", "deer", "dog", "horse"],
        }
    }

    pub fn positive_set(self) -> ClassSet {
        let ds = self.dataset();
        let idx: Vec<usize> = self
            .positive_names()
            .iter()
            .map(|n| ds.class_index(n).expect("task classes are dataset classes"))
            .collect();
        ClassSet::from_indices(&idx).expect("indices in range")
    }

    /// The (task 1, task 2) pair for a dataset.
    pub fn pair(dataset: DatasetName) -> [NamedTask; 2] {
        match dataset {
            DatasetName::Mnist => [NamedTask::MnistParity, NamedTask::MnistMagnitude],
            DatasetName::FashionMnist => [NamedTask::FashionDress, NamedTask::FashionFormal],
            DatasetName::Cifar10 => [NamedTask::CifarAnimals, NamedTask::CifarGround],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Named(NamedTask),
    /// Receiver index `i >= 1`; positives `{i, ..., i+4} mod 10`.
    ClassWindow(usize),
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaskSpec {
    pub dataset: DatasetName,
    pub kind: TaskKind,
    positive: ClassSet,
}

impl TaskSpec {
    pub fn named(task: NamedTask) -> Self {
        TaskSpec {
            dataset: task.dataset(),
            kind: TaskKind::Named(task),
            positive: task.positive_set(),
        }
    }

    pub fn window(dataset: DatasetName, i: usize) -> Result<Self> {
        Ok(TaskSpec {
            dataset,
            kind: TaskKind::ClassWindow(i),
            positive: class_window(i)?,
        })
    }

    pub fn custom(dataset: DatasetName, positive: ClassSet) -> Result<Self> {
        if !positive.is_proper() {
            return Err(Error::config(
                "positive set must be a nonempty proper subset",
            ));
        }
        Ok(TaskSpec {
            dataset,
            kind: TaskKind::Custom,
            positive,
        })
    }

    pub fn positive_set(&self) -> ClassSet {
        self.positive
    }

    pub fn complement(&self) -> Self {
        TaskSpec {
            dataset: self.dataset,
            kind: TaskKind::Custom,
            positive: self.positive.complement(),
        }
    }

    /// Short identifier: `mnist.parity`, `window:3` or `classes:0+4+7`.
    pub fn id(&self) -> String {
        match self.kind {
            TaskKind::Named(t) => String::from(t.key()),
            TaskKind::ClassWindow(i) => format!("window:{i}"),
            TaskKind::Custom => {
                let parts: Vec<String> = self
                    .positive
                    .indices()
                    .iter()
                    .map(|i| format!("{i}"))
                    .collect();
                format!("classes:{}", parts.join("+"))
            }
        }
    }

    /// Parses the form produced by [`id`](Self::id) for the given dataset.
    pub fn parse(dataset: DatasetName, s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(i) = s.strip_prefix("window:") {
            let i = i
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("bad window index in `{s}`")))?;
            return TaskSpec::window(dataset, i);
        }
        if let Some(list) = s.strip_prefix("classes:") {
            let idx = list
                .split('+')
                .map(|p| p.trim().parse::<usize>())
                .collect::<core::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::input(format!("bad class list in `{s}`")))?;
            return TaskSpec::custom(dataset, ClassSet::from_indices(&idx)?);
        }
        let task = NamedTask::ALL
            .into_iter()
            .find(|t| t.key() == s)
            .ok_or_else(|| Error::input(format!("unknown task `{s}`")))?;
        if task.dataset() != dataset {
            return Err(Error::config(format!(
                "task `{s}` does not belong to dataset {dataset}"
            )));
        }
        Ok(TaskSpec::named(task))
    }
}

/// `{i, i+1, i+2, i+3, i+4}`, each mod 10.
pub fn class_window(i: usize) -> Result<ClassSet> {
    if i == 0 {
        return Err(Error::config("class windows are indexed from 1"));
    }
    let idx: Vec<usize> = (i..i + 5).map(|c| c % NUM_CLASSES).collect();
    ClassSet::from_indices(&idx)
}

pub fn binary_label(spec: &TaskSpec, class: usize) -> Result<usize> {
    if class >= NUM_CLASSES {
        return Err(Error::input(format!("class {class} out of range")));
    }
    Ok(spec.positive.contains(class) as usize)
}

/// Binary labels for a slice of class labels.
pub fn relabel(labels: &[u8], spec: &TaskSpec) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|&c| binary_label(spec, c as usize))
        .collect()
}

/// As [`relabel`], refusing specs that belong to a different dataset.
pub fn relabel_for(dataset: DatasetName, labels: &[u8], spec: &TaskSpec) -> Result<Vec<usize>> {
    if spec.dataset != dataset {
        return Err(Error::config(format!(
            "task {} is defined for {}, not {dataset}",
            spec.id(),
            spec.dataset
        )));
    }
    relabel(labels, spec)
}
