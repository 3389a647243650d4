use claw_core::scenario::*;
use claw_core::teleop::*;
use claw_core::{Pose6, StiffnessMode, Wrench6};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1e3..1e3f64,
    ]
}

fn six() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(finite())
}

fn mode() -> impl Strategy<Value = StiffnessMode> {
    prop::sample::select(StiffnessMode::ALL.to_vec())
}

fn message() -> impl Strategy<Value = TeleopMessage> {
    prop_oneof![
        (any::<u64>(), finite(), six(), mode())
            .prop_map(|(seq, t, p, mode)| TeleopMessage::Command { seq, t, pose: Pose6::from_array(p), mode }),
        (any::<u64>(), finite(), six(), any::<bool>())
            .prop_map(|(seq, t, w, estop)| TeleopMessage::Feedback { seq, t, wrench: Wrench6::from_array(w), estop }),
        (any::<u32>(), prop::sample::select(vec![Role::Leader, Role::Follower, Role::Observer]))
            .prop_map(|(spec_version, role)| TeleopMessage::Hello { spec_version, role }),
        any::<String>().prop_map(|reason| TeleopMessage::Bye { reason }),
    ]
}

fn bits(m: &TeleopMessage) -> Vec<u64> {
    match m {
        TeleopMessage::Command { t, pose, .. } => std::iter::once(*t).chain(pose.to_array()).map(f64::to_bits).collect(),
        TeleopMessage::Feedback { t, wrench, .. } => std::iter::once(*t).chain(wrench.to_array()).map(f64::to_bits).collect(),
        _ => Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn messages_round_trip_bit_exactly(m in message()) {
        let bytes = encode(&m).unwrap();
        prop_assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(bits(&back), bits(&m));
        prop_assert_eq!(back, m);
    }

    #[test]
    fn decode_is_total(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        match decode_wire(&bytes) {
            Ok(_) => {}
            Err(CodecError::Malformed { offset, .. }) => prop_assert!(offset <= bytes.len()),
            Err(e) => prop_assert!(false, "unexpected {e:?}"),
        }
        let mut d = LineDecoder::new();
        let _ = d.feed(&bytes);
        let _ = d.finish();
    }

    #[test]
    fn corrupted_lines_never_panic(m in message(), cut in any::<prop::sample::Index>(), flip in any::<u8>()) {
        let mut bytes = encode(&m).unwrap();
        let i = cut.index(bytes.len());
        bytes[i] ^= flip;
        let _ = decode(&bytes);
        let _ = decode(&bytes[..i]);
    }
}

#[derive(serde::Deserialize)]
struct Vectors {
    valid: Vec<Valid>,
    malformed: Vec<Malformed>,
}

#[derive(serde::Deserialize)]
struct Valid {
    line: String,
    kind: String,
}

#[derive(serde::Deserialize)]
struct Malformed {
    line: String,
    offset: Option<usize>,
}

#[test]
fn shared_wire_vectors() {
    let v: Vectors = serde_json::from_str(include_str!("data/wire_vectors.json")).unwrap();
    for case in &v.valid {
        let msg = decode_wire(case.line.as_bytes()).unwrap_or_else(|e| panic!("{}: {e}", case.line));
        let kind = match &msg {
            WireMessage::Teleop(m) => m.kind(),
            WireMessage::State(_) => "state",
        };
        assert_eq!(kind, case.kind);
        let again = encode_wire(&msg).unwrap();
        assert_eq!(std::str::from_utf8(&again).unwrap().trim_end(), case.line, "canonical form");
    }
    for case in &v.malformed {
        match decode_wire(case.line.as_bytes()) {
            Err(CodecError::Malformed { offset, .. }) => {
                if let Some(want) = case.offset {
                    assert_eq!(offset, want, "{}", case.line);
                }
            }
            other => panic!("{} decoded as {other:?}", case.line),
        }
    }
}

fn door_recording() -> (ScenarioConfig, EpisodeLog) {
    let mut cfg = ScenarioConfig::default_for(ScenarioKind::DoorHandle);
    cfg.mode_schedule = vec![ModeEvent { t: 0.0, mode: StiffnessMode::FullLock }];
    let run = run_scripted(&cfg, LeverPolicy::FreeOnLatch).unwrap();
    let log = EpisodeLog::from_run(&cfg, "2025-05-01T12:00:00Z", &run);
    (cfg, log)
}

#[test]
fn door_log_replays_three_ways() {
    let (cfg, log) = door_recording();
    let text = log.to_csv_string();
    let log = EpisodeLog::parse(&text).unwrap();

    let same = replay(&log, &cfg, None).unwrap();
    assert_eq!(same.status.outcome, Outcome::Success);
    assert_eq!(same.log, log);

    let free = replay(&log, &cfg, Some(&ModeOverride::Fixed(StiffnessMode::Free))).unwrap();
    assert_eq!(free.status.outcome, Outcome::Estop);
    assert!(free.log.rows.iter().any(|r| r.event.contains("estop:fz")));
    assert!(free.log.rows.len() < log.rows.len());

    let full = replay(&log, &cfg, Some(&ModeOverride::Fixed(StiffnessMode::FullLock))).unwrap();
    assert_eq!(full.status.outcome, Outcome::Success);
    assert!(full.log.rows.iter().all(|r| r.mode == StiffnessMode::FullLock));
}

#[test]
fn replay_is_bit_identical_across_runs() {
    let (cfg, log) = door_recording();
    for over in [None, Some(ModeOverride::Fixed(StiffnessMode::Free)), Some(ModeOverride::Fixed(StiffnessMode::HalfLock))] {
        let a = replay(&log, &cfg, over.as_ref()).unwrap().log.to_csv_string();
        let b = replay(&log, &cfg, over.as_ref()).unwrap().log.to_csv_string();
        assert_eq!(a, b);
    }
}

#[test]
fn loopback_session_feedback_is_paced_and_faithful() {
    let cfg = ScenarioConfig::default_for(ScenarioKind::PegInHole);
    let mut s = FollowerSession::new(cfg.clone(), "2025-05-01T12:00:00Z").unwrap();
    let hello = decode(&encode(&TeleopMessage::hello(Role::Leader)).unwrap()).unwrap();
    assert_eq!(s.receive(hello), vec![TeleopMessage::hello(Role::Follower)]);
    let script = Script::for_config(&cfg);
    let mut last_t = 0.0;
    let mut k = 0u64;
    while s.phase() == Phase::Running {
        let cmd = TeleopMessage::Command { seq: k + 1, t: k as f64 * 0.02, pose: script.command(k as f64 * 0.02), mode: StiffnessMode::Free };
        s.receive(decode(&encode(&cmd).unwrap()).unwrap());
        let out = s.advance().unwrap();
        let TeleopMessage::Feedback { t, wrench, .. } = decode(&encode(&out.feedback).unwrap()).unwrap() else { panic!() };
        assert_eq!(wrench, s.simulation().plant().measured_wrench);
        assert_eq!(out.frame.wrench, wrench);
        if out.bye.is_none() {
            assert!((t - last_t - 0.02).abs() <= 0.001);
        }
        last_t = t;
        k += 1;
        assert!(k < 5000);
    }
    assert_eq!(s.outcome(), Outcome::Success);
    let log = s.log();
    let r = replay(&log, &cfg, None).unwrap();
    assert_eq!(r.status.outcome, Outcome::Success);
    assert_eq!(r.log, log);
}

#[test]
fn halted_and_timed_out_logs_read_back() {
    let mut seen = Vec::new();
    for (g, x) in [(GripperKind::Rigid, 3.0), (GripperKind::Rigid, 1.0), (GripperKind::ClawFree, 3.0), (GripperKind::Finray, 2.0)] {
        let mut cfg = ScenarioConfig::default_for(ScenarioKind::PegInHole);
        cfg.gripper = g;
        cfg.initial_misalignment = Pose6 { x, ..Pose6::ZERO };
        let run = run_scripted(&cfg, LeverPolicy::Schedule).unwrap();
        let text = EpisodeLog::from_run(&cfg, "t0", &run).to_csv_string();
        let log = EpisodeLog::parse(&text).unwrap_or_else(|e| panic!("{g} at {x}: {e}"));
        assert_eq!(replay(&log, &cfg, None).unwrap().log.to_csv_string(), text);
        if run.status.outcome == Outcome::Timeout {
            assert!((log.duration() - TIMEOUT).abs() < 1e-9);
        }
        seen.push(run.status.outcome);
    }
    assert!(seen.contains(&Outcome::Timeout));
    assert!(seen.iter().any(|o| matches!(o, Outcome::Slip | Outcome::Estop)));
}
