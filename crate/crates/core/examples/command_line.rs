//! Drives the `mot` command line in-process: tabulates the area law, samples a
//! path, builds its map and prints the artifacts.

fn run(args: &[&str]) {
    let code = mating_trees::cli::run(std::iter::once("mot").chain(args.iter().copied()));
    assert_eq!(code, 0, "mot {args:?}");
}

fn main() {
    let dir = std::env::temp_dir().join("mot-example");
    let at = |name: &str| dir.join(name).display().to_string();
    run(&["laws", "--which", "area", "--gamma", "sqrt2", "--grid", "0.25:2:7", "--out", &at("area.csv")]);
    run(&["sample", "bm", "--gamma", "sqrt8over3", "--dt", "1e-3", "--n", "2000", "--seed", "1", "--out", &at("bm.csv")]);
    run(&["map", "--in", &at("bm.csv"), "--cell-size", "0.02", "--out", &at("map.json"), "--stats"]);
    for name in ["area.csv", "area.csv.meta.json", "map.json.degrees.csv"] {
        println!("== {name}\n{}", std::fs::read_to_string(dir.join(name)).unwrap());
    }
}
