//! Random and grid search over a hyperparameter space, plus the built-in
//! space catalog.

use beamkit::tune::{
    builtin_space, grid_search, random_search, ParamSpec, SearchSpace, BUILTIN_SPACES,
};

fn main() {
    // A synthetic objective with a known optimum at (0.7, -0.2).
    let objective = |p: &std::collections::BTreeMap<String, f64>| -> Result<f64, String> {
        let lm = p["lm_weight"];
        let wi = p["word_insertion"];
        Ok((lm - 0.7).powi(2) + (wi + 0.2).powi(2))
    };

    let space = SearchSpace::new()
        .with("lm_weight", ParamSpec::Range { lo: 0.0, hi: 3.0, step: None })
        .with("word_insertion", ParamSpec::Range { lo: -3.0, hi: 3.0, step: None });
    let results = random_search(&space, 128, 7, objective).unwrap();
    let best = &results[0];
    println!(
        "random search best after 128 trials: objective {:.4} at {:?}",
        best.objective().unwrap(),
        best.point
    );

    let grid_space = SearchSpace::new()
        .with("lm_weight", ParamSpec::Range { lo: 0.0, hi: 3.0, step: Some(0.25) })
        .with("word_insertion", ParamSpec::Range { lo: -1.0, hi: 1.0, step: Some(0.25) });
    let results = grid_search(&grid_space, objective).unwrap();
    println!(
        "grid search over {} points: objective {:.4} at {:?}",
        grid_space.grid_size(),
        results[0].objective().unwrap(),
        results[0].point
    );

    println!("built-in spaces:");
    for name in BUILTIN_SPACES {
        let space = builtin_space(name).unwrap();
        let size = if space.is_discrete() {
            format!("{} grid points", space.grid_size())
        } else {
            "continuous".to_string()
        };
        println!("  {name}: {size}");
    }
}
