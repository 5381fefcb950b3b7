mod oracles;

use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoplane::geometry::{
    apply_homography, homography_from_quad, plane_quad, vp_from_lines, Homography, LineSegment, PlaneQuad,
};
use twoplane::{ImageSize, PlaneKind, Point2};

use oracles::{normalize_by_max, project, random_bev_to_image, rotated_segment, vp_normal_equations};

fn bev() -> ImageSize {
    ImageSize::new(1920, 1200).unwrap()
}

fn quad_through(m: &Matrix3<f64>, kind: PlaneKind) -> PlaneQuad {
    let rect = PlaneQuad::bev_rectangle(bev(), kind);
    PlaneQuad::new(rect.corners().map(|c| project(m, c)), kind).unwrap()
}

#[test]
fn dlt_recovers_random_projective_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let m = random_bev_to_image(&mut rng);
        let expected = normalize_by_max(&m.try_inverse().unwrap());
        let h = homography_from_quad(&quad_through(&m, PlaneKind::Ground), bev()).unwrap();
        worst = worst.max((h.matrix() - expected).abs().max());
    }
    assert!(worst < 1e-6, "max entry error {worst:e}");
}

#[test]
fn quad_midpoint_matches_direct_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = random_bev_to_image(&mut rng);
    let q = quad_through(&m, PlaneKind::Top);
    let h = homography_from_quad(&q, bev()).unwrap();
    let mid = project(&m, Point2::new(960.0, 600.0));
    let got = apply_homography(&h, mid).unwrap();
    assert!(got.distance(&Point2::new(960.0, 600.0)) < 1e-6, "{got:?}");
}

#[test]
fn inverse_round_trip_on_interior_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = plane_quad(Point2::new(900.0, 560.0), 0.2, 0.1, 0.6, 0.4, PlaneKind::Ground, bev()).unwrap();
    let h = homography_from_quad(&p, bev()).unwrap();
    let inv = h.inverse().unwrap();
    for _ in 0..1000 {
        let q = Point2::new(rng.random_range(1.0..1919.0), rng.random_range(1.0..1199.0));
        let back = apply_homography(&h, apply_homography(&inv, q).unwrap()).unwrap();
        assert!(back.distance(&q) < 1e-8, "{q:?} -> {back:?}");
    }
}

#[test]
fn perturbed_lines_recover_their_anchor() {
    let anchor = Point2::new(100.0, 50.0);
    let lines: Vec<LineSegment> = [0.3, 1.2, 2.4]
        .iter()
        .zip([0.01, -0.01, 0.01])
        .map(|(&dir, rot)| {
            let pivot = Point2::new(anchor.x + 200.0 * f64::cos(dir), anchor.y + 200.0 * f64::sin(dir));
            rotated_segment(anchor, dir, pivot, rot)
        })
        .collect();
    let got = vp_from_lines(&lines).unwrap();
    let oracle = vp_normal_equations(&lines);
    assert!(got.distance(&oracle) < 1e-9, "{got:?} vs {oracle:?}");
    assert!(got.distance(&anchor) < 3.0, "{got:?}");
}

#[test]
fn identity_homography_is_no_op() {
    let p = Point2::new(3.5, -2.0);
    assert_eq!(apply_homography(&Homography::identity(), p).unwrap(), p);
}

fn segment_through(p: Point2, angle: f64, offset: f64) -> LineSegment {
    let a = Point2::new(p.x + offset * angle.cos(), p.y + offset * angle.sin());
    let b = Point2::new(p.x + (offset + 150.0) * angle.cos(), p.y + (offset + 150.0) * angle.sin());
    LineSegment::new(a, b).unwrap()
}

proptest! {
    #[test]
    fn concurrent_lines_meet_at_their_point(
        x in -500.0..2500.0f64,
        y in -300.0..1500.0f64,
        angles in prop::collection::vec(0.0..std::f64::consts::PI, 2..6),
        offset in 10.0..400.0f64,
    ) {
        // keep at least one crossing pair well away from parallel
        let mut angles = angles;
        angles[1] = angles[0] + 0.7;
        let p = Point2::new(x, y);
        let lines: Vec<_> = angles.iter().map(|&a| segment_through(p, a, offset)).collect();
        let got = vp_from_lines(&lines).unwrap();
        prop_assert!(got.distance(&p) < 1e-8, "{:?} vs {:?}", got, p);
    }

    #[test]
    fn quad_corners_reach_bev_corners(
        vx in 200.0..1700.0f64,
        vy in 300.0..900.0f64,
        ta in 0.05..1.2f64,
        tb in 0.05..1.2f64,
        aa in 0.1..1.0f64,
        ab in 0.1..1.0f64,
        top in any::<bool>(),
    ) {
        let kind = if top { PlaneKind::Top } else { PlaneKind::Ground };
        let q = plane_quad(Point2::new(vx, vy), ta, tb, aa, ab, kind, bev()).unwrap();
        let h = homography_from_quad(&q, bev()).unwrap();
        let rect = PlaneQuad::bev_rectangle(bev(), kind);
        for (c, r) in q.corners().iter().zip(rect.corners()) {
            prop_assert!(apply_homography(&h, *c).unwrap().distance(r) < 1e-6);
        }
    }

    #[test]
    fn quad_corners_move_continuously(
        vx in 200.0..1700.0f64,
        vy in 300.0..900.0f64,
        ta in 0.05..1.2f64,
        aa in 0.1..0.9f64,
        which in 0usize..6,
        eps in 1e-9..1e-6f64,
    ) {
        let mut args = [vx, vy, ta, 0.3, aa, 0.5];
        let base = plane_quad(Point2::new(args[0], args[1]), args[2], args[3], args[4], args[5], PlaneKind::Ground, bev()).unwrap();
        args[which] += eps;
        let moved = plane_quad(Point2::new(args[0], args[1]), args[2], args[3], args[4], args[5], PlaneKind::Ground, bev()).unwrap();
        for (a, b) in base.corners().iter().zip(moved.corners()) {
            prop_assert!(a.distance(b) <= 10.0 * eps * 1920.0);
        }
    }
}
