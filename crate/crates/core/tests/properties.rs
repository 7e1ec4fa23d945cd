use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sasakian_reduction::action::TorusAction;
use sasakian_reduction::ambient::{eta, phi, reeb, sasaki_identity_residual, AmbientPoint};
use sasakian_reduction::levelset::{retract, solve_retraction};
use sasakian_reduction::numkit::{euclidean, gram_schmidt, nullspace, RANK_TOL};

fn vector(len: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, len).prop_map(DVector::from_vec)
}

/// Seeds whose complex coordinates are all bounded away from zero, so every
/// sign pattern of weights has a nonempty complexified orbit through them.
fn seed(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec((0.1f64..1.0, 0.0f64..std::f64::consts::TAU), n).prop_map(|pairs| {
        DVector::from_iterator(2 * pairs.len(), pairs.into_iter().flat_map(|(r, t)| [r * t.cos(), r * t.sin()]))
    })
}

fn sphere_point(n: usize) -> impl Strategy<Value = AmbientPoint> {
    seed(n).prop_map(|v| AmbientPoint::normalized(v).unwrap())
}

fn tangent_at(z: &AmbientPoint, v: DVector<f64>) -> DVector<f64> {
    let w = z.coords();
    &v - w * w.dot(&v)
}

const WEIGHTS: [&[i64]; 3] = [&[-1, -1, 1, 1], &[1, -1, 2, -3], &[-3, 1, 1, 1]];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_schmidt_is_orthonormal(vs in prop::collection::vec(vector(6), 1..5)) {
        if let Ok(o) = gram_schmidt(&vs, euclidean) {
            for (i, u) in o.vectors.iter().enumerate() {
                for (j, w) in o.vectors.iter().enumerate() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((u.dot(w) - target).abs() < 1e-10);
                }
                let rebuilt = vs.iter().enumerate().fold(DVector::zeros(6), |acc, (j, v)| acc + v * o.coeffs[(i, j)]);
                prop_assert!((rebuilt - u).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn nullspace_is_an_orthonormal_kernel(rows in 1usize..5, entries in prop::collection::vec(-1.0f64..1.0, 35)) {
        let m = DMatrix::from_fn(rows, 7, |i, j| entries[i * 7 + j]);
        let k = nullspace(&m, RANK_TOL);
        prop_assert_eq!(k.ncols(), 7 - rows);
        prop_assert!((&m * &k).amax() < 1e-10);
        prop_assert!((k.transpose() * &k - DMatrix::identity(7 - rows, 7 - rows)).amax() < 1e-10);
    }

    #[test]
    fn structure_tensor_identities(z in sphere_point(4), a in vector(8), b in vector(8)) {
        let (x, y) = (tangent_at(&z, a), tangent_at(&z, b));
        let xi = reeb(&z);
        prop_assert!((xi.norm() - 1.0).abs() < 1e-12);
        prop_assert!(phi(&z, &xi).amax() < 1e-12);
        let phi2 = phi(&z, &phi(&z, &x));
        prop_assert!((phi2 + &x - &xi * eta(&z, &x)).amax() < 1e-12);
        let lhs = phi(&z, &x).dot(&phi(&z, &y));
        prop_assert!((lhs - x.dot(&y) + eta(&z, &x) * eta(&z, &y)).abs() < 1e-12);
        prop_assert!(sasaki_identity_residual(&z, &x, &y) < 1e-12);
    }

    #[test]
    fn retraction_lands_on_level_set(w in 0usize..3, y in seed(4), scale in 0.2f64..5.0) {
        let action = TorusAction::circle(WEIGHTS[w]).unwrap();
        let r = solve_retraction(&(&y * scale), &action).unwrap();
        prop_assert!((r.z.coords().norm() - 1.0).abs() < 1e-13);
        prop_assert!(action.moment(&r.z).amax() < 1e-12);
        // homogeneous constraint: rescaling the seed changes nothing
        let unit = solve_retraction(&y, &action).unwrap();
        prop_assert!((unit.z.coords() - r.z.coords()).amax() < 1e-12);
    }

    #[test]
    fn retraction_is_idempotent_and_equivariant(w in 0usize..3, y in seed(4), t in -3.0f64..3.0) {
        let action = TorusAction::circle(WEIGHTS[w]).unwrap();
        let z = solve_retraction(&y, &action).unwrap().z;
        let again = solve_retraction(z.coords(), &action).unwrap();
        prop_assert!((again.z.coords() - z.coords()).amax() < 1e-13);
        prop_assert!(again.coeffs.amax() < 1e-13);
        let moved = solve_retraction(&action.flow(0, t, &y), &action).unwrap().z;
        prop_assert!((moved.coords() - action.flow(0, t, z.coords())).amax() < 1e-12);
    }

    #[test]
    fn torus_retraction_and_frames(y in seed(5)) {
        let action = TorusAction::new(vec![vec![1, -1, 0, 0, 0], vec![0, 1, 1, -1, -2]], 5).unwrap();
        let p = retract(&y, &action).unwrap();
        prop_assert!(action.moment(&p.z).amax() < 1e-12);
        prop_assert_eq!(p.horizontal.len(), action.reduced_dim());
        prop_assert!(p.frame_ledger(&action).unwrap() < 1e-10);
    }
}
