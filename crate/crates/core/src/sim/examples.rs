//! Builders for the reference systems: a two-mass lock-up mechanism
//! (standard / index 2), a planar index-0 / index-1 pair, and a 3-state
//! index-1 / index-2 pair whose reduction is the planar one.

use std::f64::consts::PI;

use nalgebra::{dmatrix, dvector};
use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorPair;
use crate::error::{Error, Result};
use crate::matkit::{Matrix, Vector};
use crate::switched::{admissible_entry_space, check_theorem1, reduce_order, JumpRule, Restriction, SwitchedSystem};

/// Two spring-mass-dampers that can lock together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanicalParams {
    pub m1: f64,
    pub m2: f64,
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
    /// Cross term of the candidate Lyapunov matrix.
    pub epsilon: f64,
}

impl Default for MechanicalParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            c1: 0.5,
            c2: 0.5,
            k1: 1.0,
            k2: 1.0,
            epsilon: 0.1,
        }
    }
}

impl MechanicalParams {
    pub fn m(&self) -> f64 {
        self.m1 + self.m2
    }

    pub fn c(&self) -> f64 {
        self.c1 + self.c2
    }

    pub fn k(&self) -> f64 {
        self.k1 + self.k2
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.m1, self.m2, self.k1, self.k2];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("masses and stiffnesses must be positive".into()));
        }
        if [self.c1, self.c2].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("damping must be non-negative".into()));
        }
        Ok(())
    }

    /// Velocity-averaging lock map: positions kept, both velocities set to
    /// the momentum-weighted mean.
    pub fn lock_map(&self) -> Matrix {
        let (a, b) = (self.m1 / self.m(), self.m2 / self.m());
        dmatrix![
            1.0, 0.0, 0.0, 0.0;
            0.0, a, 0.0, b;
            0.0, 0.0, 1.0, 0.0;
            0.0, a, 0.0, b
        ]
    }
}

/// Block-diagonal `[[k_i, eps m_i], [eps m_i, m_i]]`.
pub fn mechanical_p(p: &MechanicalParams, eps: f64) -> Matrix {
    dmatrix![
        p.k1, eps * p.m1, 0.0, 0.0;
        eps * p.m1, p.m1, 0.0, 0.0;
        0.0, 0.0, p.k2, eps * p.m2;
        0.0, 0.0, eps * p.m2, p.m2
    ]
}

/// Mode 0 unlocked (standard), mode 1 locked (index 2). Locking is allowed
/// on `x1 = x3` only and averages the velocities; unlocking keeps the state.
/// Returns the system and `P(epsilon)`.
pub fn build_mechanical(p: &MechanicalParams) -> Result<(SwitchedSystem, Matrix)> {
    p.validate()?;
    let e1 = Matrix::from_diagonal(&dvector![1.0, p.m1, 1.0, p.m2]);
    let a1 = dmatrix![
        0.0, 1.0, 0.0, 0.0;
        -p.k1, -p.c1, 0.0, 0.0;
        0.0, 0.0, 0.0, 1.0;
        0.0, 0.0, -p.k2, -p.c2
    ];
    let e2 = Matrix::from_diagonal(&dvector![1.0, p.m(), 1.0, 0.0]);
    let a2 = dmatrix![
        0.0, 1.0, 0.0, 0.0;
        -p.k(), -p.c(), 0.0, 0.0;
        0.0, 0.0, 0.0, 1.0;
        -1.0, 0.0, 1.0, 0.0
    ];
    let sys = SwitchedSystem::new(vec![DescriptorPair::new(e1, a1)?, DescriptorPair::new(e2, a2)?])?
        .with_continuous_default(false)
        .with_jump(
            0,
            1,
            JumpRule::new(
                p.lock_map(),
                Some(Restriction::Hyperplane(dvector![1.0, 0.0, -1.0, 0.0])),
            ),
        )?
        .with_jump(1, 0, JumpRule::identity(4))?;
    Ok((sys, mechanical_p(p, p.epsilon)))
}

/// Largest `eps` in `(0, 1]` found for which `P(eps)` certifies the
/// lock-up system: a dyadic scan `2^-k`, `k = 0..40`, then 40 bisection
/// steps between the first certified value and twice that.
pub fn find_epsilon(p: &MechanicalParams) -> Result<f64> {
    let (sys, _) = build_mechanical(p)?;
    let certifies = |eps: f64| -> Result<bool> {
        let pm = mechanical_p(p, eps);
        Ok(check_theorem1(&sys, &[pm.clone(), pm])?.certified())
    };
    let mut found = None;
    for k in 0..=40 {
        let eps = 0.5f64.powi(k);
        if certifies(eps)? {
            found = Some(eps);
            break;
        }
    }
    let mut lo = found.ok_or(Error::EpsilonNotFound)?;
    let mut hi = (2.0 * lo).min(1.0);
    if hi > lo && certifies(hi)? {
        return Ok(hi);
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if certifies(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone)]
pub struct Example2 {
    pub system: SwitchedSystem,
    pub g: Vector,
    pub h: Vector,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

fn constants() -> (f64, f64, f64) {
    (PI - 1.0, 1.0 / (4.0 * PI + 1.0), 4.0 * PI * PI + 1.0)
}

/// Index-0 mode 0 and index-1 mode 1 with a continuous state. Entering mode
/// 1 requires the state on its consistency line `k1 k2 x1 + x2 = 0`.
pub fn build_example2() -> Result<Example2> {
    let (k1, k2, k3) = constants();
    let e1 = dmatrix![1.0, 0.0; 0.0, 1.0];
    let a1 = dmatrix![-1.0, 4.0 * PI; -4.0 * PI, -4.0];
    let e2 = dmatrix![1.0, 0.0; 1.0, 0.0];
    let a2 = dmatrix![-1.0, 4.0 * PI; -PI, -1.0];
    let system = SwitchedSystem::new(vec![DescriptorPair::new(e1, a1)?, DescriptorPair::new(e2, a2)?])?.with_jump(
        0,
        1,
        JumpRule::new(
            Matrix::identity(2, 2),
            Some(Restriction::Hyperplane(dvector![k1 * k2, 1.0])),
        ),
    )?;
    Ok(Example2 {
        system,
        g: dvector![1.0, 1.0 / (4.0 * PI)],
        h: dvector![4.0 * PI / k3, -PI / k3],
        k1,
        k2,
        k3,
    })
}

#[derive(Debug, Clone)]
pub struct Example3 {
    pub system: SwitchedSystem,
    /// `(X_i, Y_i)` with `E_i = X_i Y_i'`.
    pub decomps: Vec<(Matrix, Matrix)>,
}

/// Index-1 mode 0 and index-2 mode 1 with `z = Y' x` continuous:
/// `x+ = T_j Y_i' x-`, and entering mode 1 needs `Y_0' x` in `Y_1' C_1`.
pub fn build_example3() -> Result<Example3> {
    let (k1, k2, k3) = constants();
    let e1 = dmatrix![1.0, 0.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 1.0];
    let a1 = dmatrix![-1.0, 0.0, 4.0 * PI; 0.0, -1.0, 0.0; -4.0 * PI, 0.0, -4.0];
    let e2 = dmatrix![1.0, 0.0, 0.0; 0.0, 0.0, 1.0; 0.0, 0.0, 1.0];
    let a2 = dmatrix![
        -k2 * k3, 0.0, 0.0;
        0.0, -1.0, 0.0;
        -4.0 * k1 * k2 * k3, -1.0, -4.0 * k3
    ];
    let y = dmatrix![1.0, 0.0; 0.0, 0.0; 0.0, 1.0];
    let x2 = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 1.0];
    let decomps = vec![(y.clone(), y.clone()), (x2, y.clone())];

    let plain = SwitchedSystem::new(vec![DescriptorPair::new(e1, a1)?, DescriptorPair::new(e2, a2)?])?;
    let (_, data) = reduce_order(&plain, Some(&decomps))?;
    let entry = admissible_entry_space(&plain, 1, Some((&decomps[1].0, &decomps[1].1)))?;
    let restriction = entry.preimage(&decomps[0].1.transpose(), None)?;
    let system = plain
        .with_continuous_default(false)
        .with_jump(
            0,
            1,
            JumpRule::new(&data.t[1] * y.transpose(), Some(Restriction::Subspace(restriction))),
        )?
        .with_jump(1, 0, JumpRule::new(&data.t[0] * y.transpose(), None))?;
    Ok(Example3 { system, decomps })
}
