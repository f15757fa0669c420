mod common;

use common::*;
use dccert::certificates::{check_global, CheckOptions, Verdict};
use dccert::cli::format::ProblemFile;
use dccert::oracle::brute_min;

#[test]
fn frozen_oracle_values() {
    for c in corpus() {
        let best = brute_min(&c.problem, &c.grid(), 1e-9).unwrap();
        assert!((best.value - c.value).abs() <= 1e-9, "{}: {} vs {}", c.name, best.value, c.value);
        assert!(c.problem.is_feasible(&c.opt, 1e-9), "{}", c.name);
        assert!(c.problem.is_feasible(&c.boundary, 1e-9), "{}", c.name);
    }
}

#[test]
fn corpus_round_trips_through_json() {
    for c in corpus() {
        let file = ProblemFile::from_problem(&c.problem).unwrap();
        let text = file.to_json();
        let back = ProblemFile::parse(&text).unwrap();
        assert_eq!(back, file, "{}", c.name);
        assert_eq!(back.problem().unwrap(), c.problem, "{}", c.name);
        assert_eq!(back.to_json(), text, "{}", c.name);
    }
}

#[test]
fn round_tripped_problems_give_the_same_verdicts() {
    let opts = CheckOptions::default();
    for c in corpus().into_iter().take(8) {
        let p = ProblemFile::parse(&ProblemFile::from_problem(&c.problem).unwrap().to_json()).unwrap().problem().unwrap();
        assert!(check_global(&p, &c.opt, &opts).unwrap().holds(), "{}", c.name);
        for x in &c.perturbed {
            assert!(matches!(check_global(&p, x, &opts).unwrap().verdict, Verdict::Fails { .. }), "{}", c.name);
        }
    }
}

#[test]
fn cone_encoding_round_trips() {
    for c in corpus() {
        let Some(cone) = as_cone(&c.problem) else { continue };
        let file = ProblemFile::from_problem(&cone).unwrap();
        assert_eq!(ProblemFile::parse(&file.to_json()).unwrap().problem().unwrap(), cone, "{}", c.name);
    }
}
