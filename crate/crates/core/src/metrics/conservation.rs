use crate::domain::consts::C;
use crate::domain::{FieldSet, ParticleRecord, Species};
use crate::error::{Error, Result};
use crate::solver::field_energy;

/// Global reduced quantities at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConservedQuantities {
    pub step: u64,
    pub n_particles: u64,
    /// `sum q w`.
    pub charge: f64,
    /// `sum w m u c`.
    pub momentum: [f64; 3],
    /// `sum w m |u| c`, the scale momentum errors are measured against.
    pub momentum_scale: f64,
    /// `sum w m c^2 (gamma - 1)`.
    pub kinetic: f64,
    pub field: f64,
}

impl ConservedQuantities {
    /// Sums over `particles` in the given order; pass them sorted by id for
    /// layout-independent results.
    pub fn measure(
        step: u64,
        particles: &[ParticleRecord],
        fields: &FieldSet,
        species: Species,
        cell_volume: f64,
    ) -> Self {
        let mut q = Self {
            step,
            n_particles: particles.len() as u64,
            field: field_energy(fields, cell_volume),
            ..Default::default()
        };
        let mc = species.m * C;
        for p in particles {
            q.charge += species.q * p.w;
            for a in 0..3 {
                q.momentum[a] += p.w * mc * p.u[a];
            }
            let u2 = p.u[0] * p.u[0] + p.u[1] * p.u[1] + p.u[2] * p.u[2];
            q.momentum_scale += p.w * mc * u2.sqrt();
            // gamma - 1 without cancellation for small u
            q.kinetic += p.w * mc * C * (u2 / ((1.0 + u2).sqrt() + 1.0));
        }
        q
    }

    pub fn total_energy(&self) -> f64 {
        self.kinetic + self.field
    }
}

/// Error series relative to the first entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConservationReport {
    pub history: Vec<ConservedQuantities>,
    pub charge_error: Vec<f64>,
    pub energy_error: Vec<f64>,
    pub momentum_error: Vec<f64>,
    pub count_error: Vec<i64>,
}

fn rel(a: f64, a0: f64) -> f64 {
    if a == a0 {
        0.0
    } else if a0 == 0.0 {
        (a - a0).abs()
    } else {
        ((a - a0) / a0).abs()
    }
}

pub fn conservation_report(history: &[ConservedQuantities]) -> ConservationReport {
    let Some(first) = history.first() else {
        return ConservationReport::default();
    };
    let mut r = ConservationReport {
        history: history.to_vec(),
        ..Default::default()
    };
    for h in history {
        r.charge_error.push(rel(h.charge, first.charge));
        r.energy_error
            .push(rel(h.total_energy(), first.total_energy()));
        let dp = (0..3)
            .map(|a| (h.momentum[a] - first.momentum[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        r.momentum_error.push(if first.momentum_scale > 0.0 {
            dp / first.momentum_scale
        } else {
            dp
        });
        r.count_error
            .push(h.n_particles as i64 - first.n_particles as i64);
    }
    r
}

impl ConservationReport {
    pub fn max_charge_error(&self) -> f64 {
        self.charge_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_energy_error(&self) -> f64 {
        self.energy_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_momentum_error(&self) -> f64 {
        self.momentum_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_count_error(&self) -> i64 {
        self.count_error.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Plain-text table, one line per recorded step.
    pub fn to_text(&self) -> String {
        let mut s =
            String::from("step n_particles charge_err energy_err momentum_err total_energy\n");
        for (i, h) in self.history.iter().enumerate() {
            s += &format!(
                "{} {} {:.6e} {:.6e} {:.6e} {:.10e}\n",
                h.step,
                h.n_particles,
                self.charge_error[i],
                self.energy_error[i],
                self.momentum_error[i],
                h.total_energy()
            );
        }
        s
    }
}

/// Mean squared and mean absolute difference of momentum component
/// `component` between two states, paired by particle id.
pub fn phase_space_error(
    reference: &[ParticleRecord],
    test: &[ParticleRecord],
    component: usize,
) -> Result<(f64, f64)> {
    if reference.len() != test.len() {
        return Err(Error::Comparison(format!(
            "{} reference particles vs {} test particles",
            reference.len(),
            test.len()
        )));
    }
    let mut a: Vec<&ParticleRecord> = reference.iter().collect();
    let mut b: Vec<&ParticleRecord> = test.iter().collect();
    a.sort_unstable_by_key(|p| p.id);
    b.sort_unstable_by_key(|p| p.id);
    let (mut mse, mut mae) = (0.0, 0.0);
    for (p, q) in a.iter().zip(&b) {
        if p.id != q.id {
            return Err(Error::Comparison(format!(
                "id {} paired with {}",
                p.id, q.id
            )));
        }
        let d = q.u[component] - p.u[component];
        mse += d * d;
        mae += d.abs();
    }
    let n = a.len().max(1) as f64;
    Ok((mse / n, mae / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(id: u64, u: [f64; 3]) -> ParticleRecord {
        ParticleRecord {
            id,
            pos: [0.0; 3],
            u,
            w: 2.0,
        }
    }

    #[test]
    fn static_state_has_zero_errors() {
        let f = FieldSet::new([4; 3], 1);
        let s = Species::electron();
        let ps = vec![p(0, [0.0; 3]), p(1, [0.0; 3])];
        let h: Vec<_> = (0..3)
            .map(|i| ConservedQuantities::measure(i, &ps, &f, s, 1.0))
            .collect();
        let r = conservation_report(&h);
        assert_eq!(r.max_charge_error(), 0.0);
        assert_eq!(r.max_energy_error(), 0.0);
        assert_eq!(r.max_count_error(), 0);
    }

    #[test]
    fn kinetic_energy_matches_gamma() {
        let f = FieldSet::new([4; 3], 1);
        let s = Species::electron();
        let u = [0.3, -0.4, 1.2];
        let q = ConservedQuantities::measure(0, &[p(0, u)], &f, s, 1.0);
        let g = crate::domain::gamma(u);
        assert!((q.kinetic - 2.0 * s.m * C * C * (g - 1.0)).abs() <= 1e-14 * q.kinetic);
    }

    #[test]
    fn offset_gives_mae_and_mse() {
        let a = vec![p(0, [0.1, 0.0, 0.0]), p(1, [0.2, 0.0, 0.0])];
        let b = vec![p(1, [0.2, 0.0, 0.25]), p(0, [0.1, 0.0, 0.25])];
        let (mse, mae) = phase_space_error(&a, &b, 2).unwrap();
        assert_eq!((mse, mae), (0.0625, 0.25));
        assert_eq!(phase_space_error(&a, &a, 0).unwrap(), (0.0, 0.0));
        let c = vec![p(0, [0.0; 3]), p(5, [0.0; 3])];
        assert!(matches!(
            phase_space_error(&a, &c, 0),
            Err(Error::Comparison(_))
        ));
    }
}
