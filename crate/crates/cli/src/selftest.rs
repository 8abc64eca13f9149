//! Release-gate suites: each compares a production path against an
//! independent oracle and prints one PASS/FAIL line. Deterministic under
//! the fixed seeds baked in here.

use crate::CliError;
use ahtm_core::cam::{CamBackedRm, CamGeometry, CamState, MinMaxMode, StateStage};
use ahtm_core::metrics::ars;
use ahtm_core::rm::{ReflexBackend, ReflexTable};
use ahtm_core::sdr::Sdr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cmd_selftest() -> Result<(), CliError> {
    let suites: [(&str, fn() -> Result<(), String>); 4] = [
        ("ars-oracle", ars_oracle),
        ("cam-minmax-vs-scan", cam_minmax_vs_scan),
        ("cam-search-vs-scan", cam_search_vs_scan),
        ("rm-backend-equivalence", rm_backend_equivalence),
    ];
    let mut failures = Vec::new();
    for (name, suite) in suites {
        match suite() {
            Ok(()) => println!("PASS {name}"),
            Err(reason) => {
                println!("FAIL {name}: {reason}");
                failures.push(name);
            }
        }
    }
    if failures.is_empty() {
        println!("selftest: all suites passed");
        Ok(())
    } else {
        Err(CliError::Selftest(format!("failing suites: {}", failures.join(", "))))
    }
}

fn random_sdr(rng: &mut ChaCha8Rng, width: usize, active: usize) -> Sdr {
    let bits = rand::seq::index::sample(rng, width, active).into_vec();
    Sdr::new(width, bits).expect("sampled bits in range")
}

fn ars_oracle() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..2000 {
        let predicted = random_sdr(&mut rng, 1024, 20);
        let actual = random_sdr(&mut rng, 1024, 20);
        let got = ars(&predicted, &actual).map_err(|e| e.to_string())?;
        // Independent evaluation: scan all positions for shared active bits.
        let overlap = (0..1024).filter(|&i| predicted.contains(i) && actual.contains(i)).count();
        let expected = 1.0 - overlap as f64 / actual.active_count() as f64;
        if got != expected {
            return Err(format!("trial {trial}: {got} != {expected}"));
        }
        if ars(&actual, &actual).map_err(|e| e.to_string())? != 0.0 {
            return Err("self score must be zero".into());
        }
    }
    Ok(())
}

fn tiny_geometry() -> CamGeometry {
    CamGeometry {
        subarrays_per_array: 8,
        arrays_per_stage: 2,
        stages: 3,
        rows_per_subarray: 16,
        bits_per_row: 4,
    }
}

fn cam_minmax_vs_scan() -> Result<(), String> {
    let g = tiny_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..2000 {
        let mut cam = CamState::new(g).map_err(|e| e.to_string())?;
        let rows = g.total_rows();
        let confs: Vec<u32> =
            (0..rows).map(|_| rng.random_range(0..=g.confidence_max())).collect();
        for (row, &c) in confs.iter().enumerate() {
            cam.write_confidence(row, c).map_err(|e| e.to_string())?;
        }
        let n_candidates = rng.random_range(1..=rows);
        let candidates = rand::seq::index::sample(&mut rng, rows, n_candidates).into_vec();
        let mut sorted = candidates.clone();
        sorted.sort_unstable();
        let max_got = cam.minmax(&candidates, MinMaxMode::Max).map_err(|e| e.to_string())?;
        let min_got = cam.minmax(&candidates, MinMaxMode::Min).map_err(|e| e.to_string())?;
        let max_want = *sorted
            .iter()
            .max_by_key(|&&r| (confs[r], std::cmp::Reverse(r)))
            .unwrap();
        let min_want = *sorted
            .iter()
            .min_by_key(|&&r| (confs[r], r))
            .unwrap();
        if max_got != max_want || min_got != min_want {
            return Err(format!(
                "trial {trial}: max {max_got}/{max_want} min {min_got}/{min_want}"
            ));
        }
    }
    Ok(())
}

fn cam_search_vs_scan() -> Result<(), String> {
    let g = tiny_geometry();
    let width = g.word_width();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut cam = CamState::new(g).map_err(|e| e.to_string())?;
    let mut stored: Vec<Option<Sdr>> = vec![None; g.total_rows()];
    for trial in 0..3000 {
        let row = rng.random_range(0..g.total_rows());
        let w = random_sdr(&mut rng, width, 3);
        cam.write_state(StateStage::Present, row, &w).map_err(|e| e.to_string())?;
        stored[row] = Some(w);
        let query = random_sdr(&mut rng, width, 3);
        let got = cam.search(StateStage::Present, &query).map_err(|e| e.to_string())?;
        let want: Vec<usize> = stored
            .iter()
            .enumerate()
            .filter_map(|(r, s)| (s.as_ref() == Some(&query)).then_some(r))
            .collect();
        if got.rows != want || got.miss != want.is_empty() {
            return Err(format!("trial {trial}: {:?} != {:?}", got.rows, want));
        }
    }
    Ok(())
}

fn rm_backend_equivalence() -> Result<(), String> {
    let g = tiny_geometry();
    let width = g.word_width();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let states: Vec<Sdr> = (0..width).map(|i| Sdr::new(width, vec![i]).unwrap()).collect();
    let mut soft = ReflexTable::with_saturation(g.total_rows(), g.confidence_max());
    let mut hard = CamBackedRm::new(g).map_err(|e| e.to_string())?;
    let mut prev = states[0].clone();
    for step in 0..3000 {
        let cur = states[rng.random_range(0..states.len())].clone();
        soft.observe(&prev, &cur);
        hard.observe(&prev, &cur);
        let s = soft.lookup_predict(&cur);
        let h = hard.lookup_predict(&cur);
        if s != h {
            return Err(format!("prediction diverged at step {step}"));
        }
        prev = cur;
    }
    if soft.eviction_log() != hard.eviction_log() {
        return Err("eviction victims diverged".into());
    }
    Ok(())
}
