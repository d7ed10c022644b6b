use super::AdError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub step: f64,
    pub iterations: usize,
    pub max_halvings: u32,
    /// Keep every accepted iterate in the report.
    pub keep_iterates: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            step: 0.1,
            iterations: 100,
            max_halvings: 20,
            keep_iterates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    pub x: Vec<f64>,
    /// Loss before the first iteration followed by one entry per iteration.
    pub history: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    pub grad_norm: f64,
    /// Stopped because no halving produced a decrease.
    pub stalled: bool,
}

/// Projected gradient descent with a fixed step and halving backoff.
///
/// A trial step is accepted only if it lowers the loss, so the
/// history is non-increasing. After `max_halvings` failed halvings the
/// search stops and the history is padded with the final loss.
pub fn descend<G, V, P>(
    mut grad: G,
    mut value: V,
    mut project: P,
    x0: &[f64],
    cfg: &DescentConfig,
) -> Result<DescentReport, AdError>
where
    G: FnMut(&[f64]) -> Result<(f64, Vec<f64>), AdError>,
    V: FnMut(&[f64]) -> Result<f64, AdError>,
    P: FnMut(&mut [f64]),
{
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut f, mut g) = grad(&x)?;
    if !f.is_finite() {
        return Err(AdError::NonFiniteLoss);
    }
    let mut report = DescentReport {
        x: Vec::new(),
        history: vec![f],
        iterates: Vec::new(),
        grad_norm: norm(&g),
        stalled: false,
    };
    if cfg.keep_iterates {
        report.iterates.push(x.clone());
    }
    let mut cand = vec![0.0; x.len()];
    for _ in 0..cfg.iterations {
        let mut s = cfg.step;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            for ((c, xi), gi) in cand.iter_mut().zip(&x).zip(&g) {
                *c = xi - s * gi;
            }
            project(&mut cand);
            let fc = value(&cand)?;
            if fc.is_finite() && fc < f {
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            report.stalled = true;
            break;
        }
        std::mem::swap(&mut x, &mut cand);
        let (fv, gv) = grad(&x)?;
        f = fv;
        g = gv;
        report.history.push(f);
        if cfg.keep_iterates {
            report.iterates.push(x.clone());
        }
    }
    while report.history.len() < cfg.iterations + 1 {
        report.history.push(f);
    }
    report.grad_norm = norm(&g);
    report.x = x;
    Ok(report)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_on_bowl_with_projection() {
        // minimize (x-3)² + 10(y+1)² subject to x ≤ 2
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
        let g = |x: &[f64]| vec![2.0 * (x[0] - 3.0), 20.0 * (x[1] + 1.0)];
        let cfg = DescentConfig {
            step: 0.04,
            iterations: 400,
            ..Default::default()
        };
        let r = descend(
            |x| Ok((f(x), g(x))),
            |x| Ok(f(x)),
            |x| x[0] = x[0].min(2.0),
            &[0.0, 0.0],
            &cfg,
        )
        .unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-9);
        assert!((r.x[1] + 1.0).abs() < 1e-6);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_iterations_returns_start() {
        let r = descend(
            |x| Ok((x[0] * x[0], vec![2.0 * x[0]])),
            |x| Ok(x[0] * x[0]),
            |_| {},
            &[1.5],
            &DescentConfig {
                iterations: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.x, vec![1.5]);
        assert_eq!(r.history, vec![2.25]);
    }
}
