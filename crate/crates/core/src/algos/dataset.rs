use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::AlgoError;

const IRIS_CSV: &str = include_str!("../../data/iris.csv");

/// Seed of the fixed train/validation shuffle.
pub const SPLIT_SEED: u64 = 20240601;

/// Standardised classification data with a fixed train/validation split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub num_features: usize,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<usize>,
    pub val_x: Vec<Vec<f64>>,
    pub val_y: Vec<usize>,
}

impl Dataset {
    /// The bundled Iris data, 70/30 split.
    pub fn iris() -> Self {
        Self::from_csv(IRIS_CSV, 0.7, SPLIT_SEED).expect("bundled iris.csv is well formed")
    }

    /// Parses a headered CSV whose last column is the class label.
    pub fn from_csv(text: &str, train_fraction: f64, split_seed: u64) -> Result<Self, AlgoError> {
        if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
            return Err(AlgoError::Dataset(format!("train fraction {train_fraction} outside (0, 1)")));
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| AlgoError::Dataset(e.to_string()))?;
        let num_features = header.len().checked_sub(1).filter(|&n| n > 0)
            .ok_or_else(|| AlgoError::Dataset("need at least one feature column".into()))?;

        let mut class_names: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| AlgoError::Dataset(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != num_features + 1 {
                return Err(AlgoError::Dataset(format!("row {line}: expected {} fields", num_features + 1)));
            }
            let x = record.iter().take(num_features)
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| AlgoError::Dataset(format!("row {line}: bad feature value")))?;
            let label = &record[num_features];
            let y = match class_names.iter().position(|c| c == label) {
                Some(i) => i,
                None => {
                    class_names.push(label.to_string());
                    class_names.len() - 1
                }
            };
            rows.push((x, y));
        }
        if rows.len() < 2 {
            return Err(AlgoError::Dataset("need at least two rows".into()));
        }

        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
        let n_train = ((rows.len() as f64 * train_fraction).round() as usize).clamp(1, rows.len() - 1);
        let (train, val) = rows.split_at(n_train);

        let mut mean = vec![0.0; num_features];
        let mut sd = vec![0.0; num_features];
        for (x, _) in train {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n_train as f64;
            }
        }
        for (x, _) in train {
            for ((s, m), v) in sd.iter_mut().zip(&mean).zip(x) {
                *s += (v - m).powi(2) / n_train as f64;
            }
        }
        let sd: Vec<f64> = sd.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        let scale = |x: &[f64]| x.iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect();

        Ok(Dataset {
            num_features,
            num_classes: class_names.len(),
            class_names,
            train_x: train.iter().map(|(x, _)| scale(x)).collect(),
            train_y: train.iter().map(|(_, y)| *y).collect(),
            val_x: val.iter().map(|(x, _)| scale(x)).collect(),
            val_y: val.iter().map(|(_, y)| *y).collect(),
        })
    }
}
