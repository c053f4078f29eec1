use silhouette_calib::experiment::synthesize;
use silhouette_calib::pipeline::{calibrate_sequences, match_sequences, PipelineConfig, StageTimings};
use silhouette_calib::synth::{generate_scene, SceneFile};

fn short_scene(preset: &str, seed: u64) -> SceneFile {
    let (scene, cameras) = generate_scene(preset, seed, 8).unwrap();
    SceneFile { scene, cameras }
}

fn config(exact: bool) -> PipelineConfig {
    PipelineConfig { exact_solver: exact, ransac_iterations: 500, ..PipelineConfig::default() }
}

#[test]
fn exact_solver_never_loses_to_iterative() {
    for seed in 0..4 {
        let (l, r, _) = synthesize(&short_scene("single-ellipsoid", seed), None).unwrap();
        let (_, it) = match_sequences(&l, &r, &config(false), &mut StageTimings::default()).unwrap();
        let (_, ex) = match_sequences(&l, &r, &config(true), &mut StageTimings::default()).unwrap();
        assert!(ex.exact && !it.exact);
        assert!(ex.objective >= it.objective - 1e-9, "seed {seed}: exact {} < iterative {}", ex.objective, it.objective);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let (scene, cameras) = generate_scene("single-ellipsoid", 2, 30).unwrap();
    let (l, r, _) = synthesize(&SceneFile { scene, cameras }, Some(0.02)).unwrap();
    let a = calibrate_sequences(&l, &r, &config(false)).unwrap();
    let b = calibrate_sequences(&l, &r, &config(false)).unwrap();
    assert_eq!(a.result, b.result);
    assert_eq!(a.solution, b.solution);
    assert_eq!(a.correspondences, b.correspondences);
}
