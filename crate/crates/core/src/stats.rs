//! Population statistics in `f64`, shared by the protocol and the metrics so both use one
//! convention.

/// Mean and population standard deviation (divide by `n`).
pub fn mean_std(values: impl IntoIterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = values.into_iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

pub fn mean_std_f32(values: &[f32]) -> (f64, f64) {
    mean_std(values.iter().map(|&v| v as f64))
}

/// Mean ± population std, as reported in benchmark tables.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values.iter().copied());
        MeanStd { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4}±{:.4}", self.mean, self.std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_convention() {
        let (m, s) = mean_std([1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(std::iter::empty()), (0.0, 0.0));
    }

    #[test]
    fn table_formatting() {
        let ms = MeanStd { mean: 0.93241, std: 0.06549 };
        assert_eq!(ms.to_string(), "0.9324±0.0655");
    }
}
