use super::*;
use crate::linalg::{self, CMat};
use num_complex::Complex64;

fn c1(v: f64) -> CMat {
    CMat::from_element(1, 1, Complex64::new(v, 0.0))
}

/// maximize R  s.t.  R ≤ log2(1 + w),  w ≤ p.
fn scalar_capacity(p: f64) -> DcSubproblem {
    DcSubproblem {
        num_scalars: 1,
        matrices: vec![MatrixVar { dim: 1, floor: 0.0 }],
        objective: LinearForm::default().scalar(0, 1.0),
        constraints: vec![
            Constraint::LogDet {
                affine: LinearForm::default().scalar(0, 1.0),
                base: c1(1.0),
                terms: vec![LogDetTerm { var: 0, map: c1(1.0) }],
                kind: ConstraintKind::Rate,
            },
            Constraint::Linear { form: LinearForm::constant(-p).matrix(0, c1(1.0)), kind: ConstraintKind::Power },
        ],
    }
}

#[test]
fn scalar_capacity_reaches_power_limit() {
    let (x, rep) = solve(&scalar_capacity(3.0), None).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((x.scalars[0] - 2.0).abs() < 1e-5, "R = {}", x.scalars[0]);
    assert!((x.matrices[0][(0, 0)].re - 3.0).abs() < 1e-4);
    assert!(rep.max_violation <= 1e-7);
    assert!(rep.gap <= 1e-5);
}

#[test]
fn symmetric_max_min_equalizes_rates() {
    // maximize t  s.t.  t ≤ R_k,  R_k ≤ log2(1 + w_k),  w_1 + w_2 ≤ 2.
    let mut constraints = vec![Constraint::Linear {
        form: LinearForm::constant(-2.0).matrix(0, c1(1.0)).matrix(1, c1(1.0)),
        kind: ConstraintKind::Power,
    }];
    for k in 0..2 {
        constraints.push(Constraint::Linear {
            form: LinearForm::default().scalar(0, 1.0).scalar(k + 1, -1.0),
            kind: ConstraintKind::Epigraph,
        });
        constraints.push(Constraint::LogDet {
            affine: LinearForm::default().scalar(k + 1, 1.0),
            base: c1(0.5),
            terms: vec![LogDetTerm { var: k, map: c1(0.8) }],
            kind: ConstraintKind::Rate,
        });
    }
    let prob = DcSubproblem {
        num_scalars: 3,
        matrices: vec![MatrixVar { dim: 1, floor: 0.0 }; 2],
        objective: LinearForm::default().scalar(0, 1.0),
        constraints,
    };
    let base = prob.clone();
    let (x, rep) = solve(&prob, None).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal);
    let r1 = linalg::log2_det(&c1(0.5 + 0.64 * x.matrices[0][(0, 0)].re)).unwrap();
    let r2 = linalg::log2_det(&c1(0.5 + 0.64 * x.matrices[1][(0, 0)].re)).unwrap();
    assert!((r1 - r2).abs() < 1e-6);
    let (y, _) = solve(&base, None).unwrap();
    assert_eq!(x, y, "solver must be deterministic");
}

#[test]
fn mimo_capacity_matches_water_filling() {
    let h = CMat::from_row_slice(
        2,
        2,
        &[Complex64::new(1.0, 0.2), Complex64::new(0.3, -0.5), Complex64::new(-0.4, 0.1), Complex64::new(0.7, 0.0)],
    );
    let p = 2.0;
    let prob = DcSubproblem {
        num_scalars: 1,
        matrices: vec![MatrixVar { dim: 2, floor: 0.0 }],
        objective: LinearForm::default().scalar(0, 1.0),
        constraints: vec![
            Constraint::LogDet {
                affine: LinearForm::default().scalar(0, 1.0),
                base: linalg::identity(2),
                terms: vec![LogDetTerm { var: 0, map: h.clone() }],
                kind: ConstraintKind::Rate,
            },
            Constraint::Linear { form: LinearForm::constant(-p).matrix(0, linalg::identity(2)), kind: ConstraintKind::Power },
        ],
    };
    let (x, rep) = solve(&prob, None).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal);
    let (gains, _) = linalg::hermitian_eigen_desc(&(h.adjoint() * &h));
    // Water level ν with Σ (ν − 1/g)^+ = p.
    let mut level = 0.0;
    for active in (1..=2).rev() {
        let nu = (p + gains[..active].iter().map(|g| 1.0 / g).sum::<f64>()) / active as f64;
        if nu > 1.0 / gains[active - 1] {
            level = nu;
            break;
        }
    }
    let cap: f64 = gains.iter().map(|g| (level * g).max(1.0).log2()).sum();
    assert!((x.scalars[0] - cap).abs() < 1e-5, "{} vs {cap}", x.scalars[0]);
}

#[test]
fn certify_flags_perturbation_and_zero_point() {
    let prob = scalar_capacity(3.0);
    let (mut x, _) = solve(&prob, None).unwrap();
    assert!(certify(&prob, &x).unwrap().max_violation <= 1e-7);
    x.matrices[0] *= Complex64::new(1.1, 0.0);
    assert!(certify(&prob, &x).unwrap().max_violation > 0.0);
    let zero = Point { scalars: vec![0.0], matrices: vec![c1(0.0)] };
    let cert = certify(&prob, &zero).unwrap();
    assert_eq!(cert.max_violation, 0.0);
    assert_eq!(cert.objective, 0.0);
    let bad = Point { scalars: vec![], matrices: vec![] };
    assert!(certify(&prob, &bad).is_err());
}

#[test]
fn infeasible_problem_is_reported() {
    let mut prob = scalar_capacity(3.0);
    prob.constraints.push(Constraint::Linear { form: LinearForm::constant(1.0), kind: ConstraintKind::Bound });
    assert!(solve(&prob, None).is_err());
}

#[test]
fn feasibility_phase_keeps_free_scalars_bounded() {
    let prob = scalar_capacity(3.0);
    let start = Point { scalars: vec![10.0], matrices: vec![c1(0.5)] };
    let (x, rep) = solve(&prob, Some(&start)).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((x.scalars[0] - 2.0).abs() < 1e-5, "R = {}", x.scalars[0]);
    assert_eq!(rep.objective, prob.objective.eval(&x));
}
