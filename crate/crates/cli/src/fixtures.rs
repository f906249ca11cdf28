//! Published normalizing-constant values used by `verify`.
//!
//! The Bingham rows use θ = (0, 1, 2, κ), (0, 1, 2, κ, κ), (0, 1, 22, κ) and
//! (0, 1, 22, κ, κ); the complex Bingham rows use θ_c = (0, 1, 2, κ) and
//! (0, 1, 22, κ), evaluated on the duplicated real coefficients.

pub const KAPPAS: [f64; 6] = [5.0, 10.0, 30.0, 50.0, 100.0, 200.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Bingham,
    ComplexBingham,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub table: u8,
    pub family: Family,
    pub label: &'static str,
    /// Coefficients before duplication for complex rows.
    pub theta: Vec<f64>,
    pub expected: f64,
}

impl Fixture {
    pub fn name(&self) -> String {
        format!(
            "table{} {} kappa={}",
            self.table,
            self.label,
            self.theta.last().copied().unwrap_or(0.0)
        )
    }
}

fn table(
    table: u8,
    family: Family,
    label: &'static str,
    base: &[f64],
    repeat: usize,
    values: [f64; 6],
) -> Vec<Fixture> {
    KAPPAS
        .iter()
        .zip(values)
        .map(|(&k, expected)| {
            let mut theta = base.to_vec();
            theta.extend(std::iter::repeat_n(k, repeat));
            Fixture {
                table,
                family,
                label,
                theta,
                expected,
            }
        })
        .collect()
}

/// Every table row (Tables 1-4).
pub fn all() -> Vec<Fixture> {
    let mut v = Vec::new();
    v.extend(table(
        1,
        Family::Bingham,
        "4-dim",
        &[0.0, 1.0, 2.0],
        1,
        [4.238950, 2.985576, 1.711919, 1.323994, 0.935094, 0.660814],
    ));
    v.extend(table(
        1,
        Family::Bingham,
        "5-dim",
        &[0.0, 1.0, 2.0],
        2,
        [3.372017, 1.689355, 0.556123, 0.332661, 0.165940, 0.082871],
    ));
    v.extend(table(
        2,
        Family::ComplexBingham,
        "complex",
        &[0.0, 1.0, 2.0],
        1,
        [5.936835, 3.425468, 1.246421, 0.760180, 0.384675, 0.193477],
    ));
    v.extend(table(
        3,
        Family::Bingham,
        "4-dim",
        &[0.0, 1.0, 22.0],
        1,
        [1.273161, 0.883394, 0.503213, 0.388775, 0.274375, 0.193826],
    ));
    v.extend(table(
        3,
        Family::Bingham,
        "5-dim",
        &[0.0, 1.0, 22.0],
        2,
        [1.044072, 0.505223, 0.163901, 0.097828, 0.048725, 0.024316],
    ));
    v.extend(table(
        4,
        Family::ComplexBingham,
        "complex",
        &[0.0, 1.0, 22.0],
        1,
        [0.921726, 0.506341, 0.177495, 0.107458, 0.054081, 0.027127],
    ));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shapes() {
        let f = all();
        assert_eq!(f.len(), 36);
        assert_eq!(f[7].theta, vec![0.0, 1.0, 2.0, 10.0, 10.0]);
        assert_eq!(f[7].expected, 1.689355);
        assert_eq!(
            f.iter()
                .filter(|x| x.family == Family::ComplexBingham)
                .count(),
            12
        );
    }
}
