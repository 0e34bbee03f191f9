//! Filter of (constraint violation, barrier objective) pairs.

use super::FilterConfig;

#[derive(Clone, Debug)]
pub(crate) struct Filter {
    entries: Vec<(f64, f64)>,
    pub theta_max: f64,
    pub theta_min: f64,
}

pub(crate) enum Acceptance {
    /// Sufficient decrease of the barrier objective (no filter update).
    ObjectiveStep,
    /// Acceptable to the filter; the filter must be augmented.
    FilterStep,
    Rejected,
}

impl Filter {
    pub fn new(theta0: f64) -> Self {
        let t = theta0.max(1.0);
        Filter { entries: Vec::new(), theta_max: 1e4 * t, theta_min: 1e-4 * t }
    }

    pub fn reset(&mut self) {
        self.entries.clear();
    }

    fn acceptable(&self, theta: f64, phi: f64) -> bool {
        theta <= self.theta_max && self.entries.iter().all(|&(t, p)| theta < t || phi < p)
    }

    pub fn augment(&mut self, theta: f64, phi: f64, c: &FilterConfig) {
        let (t, p) = ((1.0 - c.gamma_theta) * theta, phi - c.gamma_phi * theta);
        self.entries.retain(|&(et, ep)| !(et >= t && ep >= p));
        self.entries.push((t, p));
    }

    /// Classify a trial point. `dphi` is the barrier objective's directional
    /// derivative along the step.
    #[allow(clippy::too_many_arguments)]
    pub fn check(&self, theta: f64, phi: f64, dphi: f64, alpha: f64, theta_t: f64, phi_t: f64, c: &FilterConfig) -> Acceptance {
        if !phi_t.is_finite() || !theta_t.is_finite() || !self.acceptable(theta_t, phi_t) {
            return Acceptance::Rejected;
        }
        let switching = dphi < 0.0 && alpha * (-dphi).powf(c.s_phi) > c.delta * theta.powf(c.s_theta);
        if theta <= self.theta_min && switching {
            if phi_t <= phi + c.eta_phi * alpha * dphi {
                Acceptance::ObjectiveStep
            } else {
                Acceptance::Rejected
            }
        } else if theta_t <= (1.0 - c.gamma_theta) * theta || phi_t <= phi - c.gamma_phi * theta {
            Acceptance::FilterStep
        } else {
            Acceptance::Rejected
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominated_points_are_rejected() {
        let c = FilterConfig::default();
        let mut f = Filter::new(1.0);
        f.augment(1.0, 10.0, &c);
        assert!(!f.acceptable(2.0, 11.0));
        assert!(f.acceptable(0.5, 11.0));
        assert!(f.acceptable(2.0, 9.0));
        assert!(matches!(f.check(1.0, 10.0, 1.0, 1.0, 2.0, 11.0, &c), Acceptance::Rejected));
    }

    #[test]
    fn objective_decrease_near_feasibility() {
        let c = FilterConfig::default();
        let f = Filter::new(0.0);
        assert!(matches!(f.check(0.0, 1.0, -1.0, 1.0, 0.0, 0.5, &c), Acceptance::ObjectiveStep));
        assert!(matches!(f.check(0.0, 1.0, -1.0, 1.0, 0.0, 1.0, &c), Acceptance::Rejected));
    }
}
