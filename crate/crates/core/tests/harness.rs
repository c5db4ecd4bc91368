mod common;

use std::path::Path;

use grasp_select::harness::{
    csv_string, fixture::parse_fixture, run_suite, sample_in_regions, sample_scenario, Fixture,
    RankChoice, Region, ScenarioConfig, TaskKind, CSV_HEADER,
};
use grasp_select::metrics::RankMode;
use grasp_select::tasks::Task;
use grasp_select::world::object_pose_in_collision;
use grasp_select::Error;

fn strip_wall_column(csv: &str) -> String {
    let wall = CSV_HEADER.iter().position(|h| *h == "plan_wall_s").unwrap();
    csv.lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != wall)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn small(kind: TaskKind, seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(Fixture::default_fixture(), kind, seed).unwrap();
    c.trials = 3;
    c
}

#[test]
fn uniform_sampling_passes_chi_square() {
    let region = Region {
        x: (0.3, 0.6),
        y: (-0.1, 0.4),
    };
    let mut rng = common::rng(17);
    let bins = 10;
    let n = 20_000;
    let mut counts = vec![0usize; bins * bins];
    for _ in 0..n {
        let (x, y) = sample_in_regions(&[region], &mut rng);
        assert!(region.contains(&grasp_select::Vec3::new(x, y, 0.0)));
        let i = (((x - 0.3) / 0.3 * bins as f64) as usize).min(bins - 1);
        let j = (((y + 0.1) / 0.5 * bins as f64) as usize).min(bins - 1);
        counts[i * bins + j] += 1;
    }
    let expected = n as f64 / (bins * bins) as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 99 degrees of freedom, 0.1% upper tail.
    assert!(chi2 < 148.2, "chi2 = {chi2}");
}

#[test]
fn regions_are_chosen_evenly() {
    let a = Region {
        x: (0.0, 0.1),
        y: (0.0, 0.1),
    };
    let b = Region {
        x: (1.0, 1.5),
        y: (1.0, 1.5),
    };
    let mut rng = common::rng(3);
    let n = 10_000;
    let in_a = (0..n)
        .filter(|_| sample_in_regions(&[a, b], &mut rng).0 < 0.5)
        .count();
    let z = (in_a as f64 - n as f64 / 2.0) / (n as f64 / 4.0).sqrt();
    assert!(z.abs() < 3.3, "z = {z}");
}

#[test]
fn scenarios_respect_regions_and_are_collision_free() {
    for kind in [TaskKind::PickPlace, TaskKind::Pour] {
        let c = small(kind, 11);
        let s = c.settings().clone();
        for subject in 0..c.subjects.len() {
            for trial in 0..20 {
                let sc = sample_scenario(&c, subject, trial).unwrap();
                let base = common::fixture_scene();
                match &sc.task {
                    Task::PickPlace(t) => {
                        let p = t.start_pose.translation.vector;
                        assert!(s.start_regions.iter().any(|r| r.contains(&p)));
                        assert!(s.goal_regions.iter().any(|r| r.contains(&t.goal_position)));
                        assert!(!object_pose_in_collision(&base, &t.obj, &t.start_pose));
                    }
                    Task::Pour(t) => {
                        let p = t.pourer_start.translation.vector;
                        let r = t.receiver_pose.translation.vector;
                        assert!(s.start_regions.iter().any(|g| g.contains(&p)));
                        assert!(s.receiver_regions.iter().any(|g| g.contains(&r)));
                        let with_receiver = base
                            .clone()
                            .with_object(t.receiver.clone(), t.receiver_pose);
                        assert!(!object_pose_in_collision(
                            &with_receiver,
                            &t.pourer,
                            &t.pourer_start
                        ));
                    }
                }
                assert_eq!(sc, sample_scenario(&c, subject, trial).unwrap());
            }
        }
    }
}

#[test]
fn suites_are_reproducible_apart_from_wall_time() {
    for kind in [TaskKind::PickPlace, TaskKind::Pour] {
        let a = csv_string(&run_suite(&small(kind, 7)).rows);
        let b = csv_string(&run_suite(&small(kind, 7)).rows);
        assert_eq!(strip_wall_column(&a), strip_wall_column(&b));
        assert!(a.starts_with(&CSV_HEADER.join(",")));
    }
}

#[test]
fn mode_subsets_reproduce_the_full_run() {
    let full = run_suite(&small(TaskKind::PickPlace, 21));
    let mut only = small(TaskKind::PickPlace, 21);
    only.modes = vec![RankMode::Average];
    let part = run_suite(&only);
    let pick = |rows: &[grasp_select::harness::ResultRow]| {
        rows.iter()
            .filter(|r| r.mode == RankMode::Average)
            .map(|r| {
                (
                    r.object.clone(),
                    r.trial,
                    r.success,
                    r.grasp_id,
                    r.hand_disp_m,
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(pick(&full.rows), pick(&part.rows));
}

#[test]
fn rank_choice_parsing() {
    assert_eq!("best".parse::<RankChoice>().unwrap(), RankChoice::Best);
    assert_eq!("worst".parse::<RankChoice>().unwrap(), RankChoice::Worst);
    assert_eq!(
        "index:2".parse::<RankChoice>().unwrap(),
        RankChoice::Index(2)
    );
    assert!("middle".parse::<RankChoice>().is_err());
    assert_eq!(RankChoice::Worst.resolve(4), Some(3));
    assert_eq!(RankChoice::Index(4).resolve(4), None);
}

#[test]
fn fixture_errors_name_the_line() {
    let text = "[arm]\nupper_arm = 0.35\n[object]\nname = a\nshape = blob\n";
    match parse_fixture(text, Path::new("bad.fix")) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unreachable_regions_are_rejected() {
    let text = grasp_select::harness::fixture::DEFAULT_FIXTURE.replace(
        "start_region = 0.30 0.60 -0.05 0.40",
        "start_region = 2.0 2.5 2.0 2.5",
    );
    let f = parse_fixture(&text, Path::new("far.fix")).unwrap();
    assert!(matches!(
        ScenarioConfig::new(f, TaskKind::PickPlace, 1),
        Err(Error::Config(_))
    ));
}
