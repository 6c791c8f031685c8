use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KappaError {
    #[error("confusion matrix is empty")]
    Empty,
    #[error("kappa is undefined when chance agreement is 1")]
    Undefined,
}

/// Square matrix; rows are actual classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    cells: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            n: classes,
            cells: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            cells: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.cells[actual * self.n + predicted]
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.cells[actual * self.n + predicted] += 1;
    }

    pub fn remove(&mut self, actual: usize, predicted: usize) {
        let c = &mut self.cells[actual * self.n + predicted];
        *c = c.checked_sub(1).expect("removing an absent pair");
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|c| self.get(c, c)).sum()
    }

    pub fn actual_marginal(&self, c: usize) -> u64 {
        (0..self.n).map(|p| self.get(c, p)).sum()
    }

    pub fn predicted_marginal(&self, c: usize) -> u64 {
        (0..self.n).map(|a| self.get(a, c)).sum()
    }

    /// Observed agreement p0.
    pub fn accuracy(&self) -> Option<f64> {
        let t = self.total();
        (t > 0).then(|| self.trace() as f64 / t as f64)
    }

    /// Cohen's kappa, computed in integers as
    /// `(N·trace − Σ r·k) / (N² − Σ r·k)` and divided once.
    pub fn kappa(&self) -> Result<f64, KappaError> {
        let n = self.total() as u128;
        if n == 0 {
            return Err(KappaError::Empty);
        }
        let chance: u128 = (0..self.n)
            .map(|c| self.actual_marginal(c) as u128 * self.predicted_marginal(c) as u128)
            .sum();
        let denom = n * n - chance;
        if denom == 0 {
            return Err(KappaError::Undefined);
        }
        let num = (n * self.trace() as u128) as i128 - chance as i128;
        Ok(num as f64 / denom as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let m = ConfusionMatrix::from_rows(&[vec![40, 10], vec![20, 30]]);
        assert_eq!(m.accuracy(), Some(0.7));
        assert_eq!(m.kappa(), Ok(0.4));
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(ConfusionMatrix::new(2).kappa(), Err(KappaError::Empty));
        let one_class = ConfusionMatrix::from_rows(&[vec![5, 0], vec![0, 0]]);
        assert_eq!(one_class.kappa(), Err(KappaError::Undefined));
        let diagonal = ConfusionMatrix::from_rows(&[vec![5, 0], vec![0, 7]]);
        assert_eq!(diagonal.kappa(), Ok(1.0));
        // always predicting the majority of a balanced window
        let majority = ConfusionMatrix::from_rows(&[vec![50, 0], vec![50, 0]]);
        assert_eq!(majority.kappa(), Ok(0.0));
    }
}
