use claw_core::controller::*;
use claw_core::geometry::*;
use claw_core::lockstate::*;
use claw_core::wristmodel::*;
use claw_core::{Axis, Deflection6, Pose6, Wrench6};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec_strategy() -> impl Strategy<Value = LeafSpringSpec> {
    (5.0..25.0f64, 120.0..300.0f64, 0.0..120.0f64, 5.0..30.0f64, 0.0..10.0f64, -20.0..20.0f64).prop_filter_map(
        "valid spec",
        |(r, l_total, d, l_clamp, l_joint_arm, x0)| {
            let s = LeafSpringSpec { r, l_total, d, l_clamp, l_joint_arm, x0 };
            analyze(&s).ok().map(|_| s)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn width_inversion_round_trips(s in spec_strategy()) {
        let w = compute_loop_width(&s).unwrap();
        let d = compute_joint_distance(w, s.l_total, s.r).unwrap();
        prop_assert!((d - s.d).abs() < 1e-9);
    }

    #[test]
    fn allowable_is_four_fifths(s in spec_strategy()) {
        let g = analyze(&s).unwrap();
        prop_assert_eq!(g.x_allow.to_bits(), (0.8 * g.x_max).to_bits());
        prop_assert!((g.x_allow / g.x_max - 0.8).abs() <= f64::EPSILON);
        prop_assert!(g.width >= 2.0 * s.r);
    }

    #[test]
    fn x_max_monotone(s in spec_strategy(), bump in 0.01..5.0f64) {
        let base = compute_x_max(&s).unwrap();
        let longer = LeafSpringSpec { l_total: s.l_total + 2.0 * bump, ..s };
        prop_assert!(compute_x_max(&longer).unwrap() > base);
        let shifted = LeafSpringSpec { x0: s.x0 + bump, ..s };
        if let Ok(v) = compute_x_max(&shifted) {
            prop_assert!(v < base);
        }
        let rounder = LeafSpringSpec { r: s.r + bump, ..s };
        if let Ok(v) = compute_x_max(&rounder) {
            prop_assert!(v < base);
        }
    }
}

fn params() -> StiffnessParams {
    StiffnessParams::default()
}

fn on_axis(axis: Axis, v: f64) -> Deflection6 {
    let mut d = Deflection6::ZERO;
    d[axis] = v;
    d
}

#[test]
fn published_ratio_anchors() {
    let p = calibrate(&published_anchors(), DEFAULT_BASE_SCALE).unwrap();
    let r = |axis, v, mode| p.axis_reaction(axis, v, mode).abs() / p.axis_reaction(axis, v, StiffnessMode::Free).abs();
    let y = r(Axis::Y, 15.0, StiffnessMode::FullLock);
    let yaw_full = r(Axis::Yaw, 30.0, StiffnessMode::FullLock);
    let yaw_half = r(Axis::Yaw, 30.0, StiffnessMode::HalfLock);
    assert!((1.7..=2.3).contains(&y), "{y}");
    assert!((2.55..=3.45).contains(&yaw_full), "{yaw_full}");
    assert!((1.7..=2.3).contains(&yaw_half), "{yaw_half}");
    for z in [-8.0, -1.0, 1.0, 12.0] {
        let f = p.axis_reaction(Axis::Z, z, StiffnessMode::Free);
        for m in StiffnessMode::ALL {
            assert_eq!(p.axis_reaction(Axis::Z, z, m).to_bits(), f.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn modes_are_ordered(frac in 0.001..1.0f64, sign in prop::bool::ANY) {
        let p = params();
        let s = if sign { 1.0 } else { -1.0 };
        for axis in [Axis::X, Axis::Y, Axis::Yaw] {
            let bound = p.envelope.bounds(axis, StiffnessMode::FullLock).1;
            let v = s * frac * bound;
            let f = |m| p.axis_reaction(axis, v, m).abs();
            let (free, half, full) = (f(StiffnessMode::Free), f(StiffnessMode::HalfLock), f(StiffnessMode::FullLock));
            prop_assert!(full >= half && half >= free);
            if axis == Axis::X {
                prop_assert!(half > free);
            }
            prop_assert!(full > free);
        }
    }

    #[test]
    fn half_lock_is_anisotropic(v in -40.0..40.0f64) {
        prop_assume!(v != 0.0);
        let p = params();
        prop_assert!(p.axis_reaction(Axis::X, v, StiffnessMode::HalfLock).abs() > p.axis_reaction(Axis::X, v, StiffnessMode::Free).abs());
        prop_assert_eq!(
            p.axis_reaction(Axis::Y, v, StiffnessMode::HalfLock).to_bits(),
            p.axis_reaction(Axis::Y, v, StiffnessMode::Free).to_bits()
        );
    }

    #[test]
    fn z_identical_across_modes(v in -12.0..25.0f64) {
        let p = params();
        let d = on_axis(Axis::Z, v);
        let free = reaction_wrench(&d, StiffnessMode::Free, &p).fz;
        for m in StiffnessMode::ALL {
            prop_assert_eq!(reaction_wrench(&d, m, &p).fz.to_bits(), free.to_bits());
        }
    }

    #[test]
    fn odd_symmetry_off_z(a in prop::array::uniform6(-50.0..50.0f64)) {
        let p = params();
        let d = Deflection6::from_array(a);
        for m in StiffnessMode::ALL {
            let w = reaction_wrench(&d, m, &p);
            let n = reaction_wrench(&-d, m, &p);
            for axis in Axis::ALL.into_iter().filter(|&a| a != Axis::Z) {
                prop_assert_eq!(n[axis], -w[axis]);
            }
        }
    }

    #[test]
    fn force_is_energy_gradient(axis_i in 0usize..6, frac in 0.05..0.95f64, sign in prop::bool::ANY) {
        let p = params();
        let axis = Axis::ALL[axis_i];
        for m in StiffnessMode::ALL {
            let (lo, hi) = p.envelope.bounds(axis, m);
            let v = if sign { frac * hi } else { frac * lo };
            let h = 1e-4 * v.abs().max(1e-3);
            let grad = (p.axis_energy(axis, v + h, m) - p.axis_energy(axis, v - h, m)) / (2.0 * h);
            let f = p.axis_reaction(axis, v, m);
            prop_assert!((f + grad).abs() <= 1e-4 * f.abs().max(1e-9), "{axis} {m} {v}: {f} vs {}", -grad);
        }
    }
}

/// Work done by the wrist along a straight segment, exact for the piecewise
/// cubic force law once the segment is split where Z changes sign.
fn segment_work(p: &StiffnessParams, m: StiffnessMode, a: &Deflection6, b: &Deflection6) -> f64 {
    let mut cuts = vec![0.0, 1.0];
    if a.z * b.z < 0.0 {
        cuts.insert(1, a.z / (a.z - b.z));
    }
    let at = |s: f64| Deflection6::from_array(std::array::from_fn(|i| a.to_array()[i] + s * (b.to_array()[i] - a.to_array()[i])));
    let dir = *b - *a;
    let power = |s: f64| {
        let w = reaction_wrench(&at(s), m, p);
        Axis::ALL.iter().map(|&ax| w[ax] * dir[ax]).sum::<f64>()
    };
    cuts.windows(2)
        .map(|c| {
            let (s0, s1) = (c[0], c[1]);
            let n = 8;
            let h = (s1 - s0) / n as f64;
            let mut acc = power(s0) + power(s1);
            for k in 1..n {
                acc += power(s0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_loops_do_no_work(points in prop::collection::vec(prop::array::uniform6(-0.9..0.9f64), 3..8)) {
        let p = params();
        for m in StiffnessMode::ALL {
            let verts: Vec<Deflection6> = points
                .iter()
                .map(|u| Deflection6::from_array(std::array::from_fn(|i| {
                    let axis = Axis::ALL[i];
                    let (lo, hi) = p.envelope.bounds(axis, m);
                    if u[i] >= 0.0 { u[i] * hi } else { -u[i] * lo }
                })))
                .collect();
            let work: f64 = (0..verts.len()).map(|i| segment_work(&p, m, &verts[i], &verts[(i + 1) % verts.len()])).sum();
            prop_assert!(work.abs() < 1e-6, "{m}: {work}");
        }
    }
}

#[test]
fn envelope_clamps_at_bounds() {
    let env = DeformationEnvelope::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let expected = [(Axis::X, 40.0, 40.0), (Axis::Y, 40.0, 40.0), (Axis::Z, 10.0, 20.0), (Axis::Roll, 15.0, 15.0), (Axis::Pitch, 15.0, 15.0)];
    for m in StiffnessMode::ALL {
        let yaw = if m == StiffnessMode::Free { 45.0 } else { 30.0 };
        for (axis, neg, pos) in expected.into_iter().chain([(Axis::Yaw, yaw, yaw)]) {
            for _ in 0..1000 {
                let v = rng.gen_range(-2.0 * neg..2.0 * pos);
                let (out, hit) = apply_envelope(&on_axis(axis, v), m, &env);
                let want = v.clamp(-neg, pos);
                assert_eq!(out[axis], want, "{axis} {m} {v}");
                assert_eq!(hit.contains(&axis), v != want);
                for other in Axis::ALL.into_iter().filter(|&a| a != axis) {
                    assert_eq!(out[other], 0.0);
                }
            }
        }
    }
}

#[test]
fn lock_transitions_exhaustive() {
    for from in StiffnessMode::ALL {
        for to in StiffnessMode::ALL {
            for dt in [0.0005, 0.002, 0.01, 0.07] {
                let mut s = LockState::seated(from);
                let distance = (to.carrier_position() - from.carrier_position()).abs();
                let limit = distance / DEFAULT_CARRIER_RATE;
                let mut t = 0.0;
                let mut saw_free = from == StiffnessMode::Free;
                while s.mode != to || s.in_transit() {
                    s = command_mode(&s, to, dt);
                    t += dt;
                    s.check_invariants().unwrap();
                    saw_free |= s.mode == StiffnessMode::Free;
                    assert!(t <= limit + dt + 1e-12, "{from}->{to} dt={dt} not done at {t}");
                }
                assert_eq!(s.carrier_position, to.carrier_position());
                if distance == 2.0 && dt * DEFAULT_CARRIER_RATE < 2.0 {
                    assert!(saw_free, "{from}->{to} dt={dt} skipped free");
                }
            }
        }
    }
}

#[test]
fn locked_axes_images() {
    let images: Vec<_> = StiffnessMode::ALL.iter().map(|&m| locked_axes(m)).collect();
    assert_eq!(images[0], [].into());
    assert_eq!(images[1], [LockedAxis::X].into());
    assert_eq!(images[2], [LockedAxis::X, LockedAxis::Y, LockedAxis::Yaw].into());
}

fn random_run(seed: u64) -> Vec<PlantState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Controller::new(ControllerGains::default(), EStopMonitor::new(1e9, 1e9), INNER_DT).unwrap();
    let mut s = PlantState::at_rest(Pose6::ZERO);
    let mut out = Vec::new();
    for k in 0..500 {
        if k % 7 == 0 {
            c.set_command(Pose6::from_array(std::array::from_fn(|_| rng.gen_range(-5.0..5.0))));
        }
        s.measured_wrench = Wrench6::from_array(std::array::from_fn(|_| rng.gen_range(-3.0..3.0)));
        s = c.step(&s).unwrap();
        out.push(s);
    }
    out
}

#[test]
fn controller_is_deterministic() {
    for seed in 0..5 {
        let a = random_run(seed);
        let b = random_run(seed);
        assert!(a.iter().zip(&b).all(|(x, y)| x.tcp_pose.to_array().map(f64::to_bits) == y.tcp_pose.to_array().map(f64::to_bits)
            && x.tcp_velocity.to_array().map(f64::to_bits) == y.tcp_velocity.to_array().map(f64::to_bits)));
    }
}

#[test]
fn ten_inner_steps_per_window() {
    let mut c = Controller::new(ControllerGains::default(), EStopMonitor::new(1e9, 1e9), INNER_DT).unwrap();
    assert_eq!(c.gate.ticks_per_window, 10);
    let mut s = PlantState::at_rest(Pose6::ZERO);
    s = c.step(&s).unwrap();
    c.set_command(Pose6 { x: 1.0, ..Pose6::ZERO });
    for _ in 1..10 {
        s = c.step(&s).unwrap();
        assert_eq!(s.commanded_pose.x, 0.0);
    }
    s = c.step(&s).unwrap();
    assert_eq!(s.commanded_pose.x, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn virtual_energy_never_grows(
        offset in prop::array::uniform6(-5.0..5.0f64),
        velocity in prop::array::uniform6(-50.0..50.0f64),
    ) {
        let gains = ControllerGains::default();
        let mut s = PlantState::at_rest(Pose6::ZERO);
        s.tcp_pose = Pose6::from_array(offset);
        s.tcp_velocity = Pose6::from_array(velocity);
        let mut e = s.virtual_energy(&gains);
        for _ in 0..500 {
            s = step_controller(&s, &gains, &Wrench6::ZERO, INNER_DT);
            let next = s.virtual_energy(&gains);
            prop_assert!(next <= e * (1.0 + 1e-12) + 1e-15, "{next} > {e}");
            e = next;
        }
    }
}
