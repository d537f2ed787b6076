use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn cakecut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cakecut"))
        .args(args)
        .output()
        .expect("spawn cakecut")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn line<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(str::trim))
        .unwrap_or_else(|| panic!("no `{key}` line in\n{text}"))
}

fn example(dir: &TempDir, name: &str) -> PathBuf {
    let path = dir.path().join(format!("{name}.json"));
    let o = cakecut(&["example", name, "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn um_on_figure3() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "figure3");
    let o = cakecut(&["run", "--mechanism", "um", "--instance", s(&f)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(line(&text, "cuts"), "0.416666666667 0.583333333333");
    assert_eq!(line(&text, "utilities"), "0.71875 0.4375 0.71875");
    assert_eq!(line(&text, "sum"), "1.875");
}

#[test]
fn ww_gives_everyone_a_third() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "figure3");
    let o = cakecut(&["run", "--mechanism", "ww", "--instance", s(&f)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(line(&text, "utilities").starts_with("0.333333"));
    assert_eq!(line(&text, "queries"), "cut 6 eval 0");
}

#[test]
fn transcript_lists_every_query() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "figure3");
    let o = cakecut(&["run", "--mechanism", "ll", "--instance", s(&f), "--transcript"]);
    let text = stdout(&o);
    let queries: Vec<&str> = text.lines().filter(|l| l.starts_with(char::is_numeric)).collect();
    let cuts = queries.iter().filter(|l| l.split(' ').nth(1) == Some("cut")).count();
    let evals = queries.iter().filter(|l| l.split(' ').nth(1) == Some("eval")).count();
    assert_eq!(line(&text, "queries"), format!("cut {cuts} eval {evals}"));
}

#[test]
fn run_then_audit() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "figure3");
    let alloc = dir.path().join("mww.json");
    let o = cakecut(&["run", "--mechanism", "mww", "--instance", s(&f), "--out", s(&alloc)]);
    assert!(o.status.success());
    let o = cakecut(&["audit", "--instance", s(&f), "--allocation", s(&alloc), "--checks", "ef,prop"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    // MWW leaves value on the table here
    let o = cakecut(&["audit", "--instance", s(&f), "--allocation", s(&alloc), "--checks", "po"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("po: fail"));

    let um = dir.path().join("um.json");
    cakecut(&["run", "--mechanism", "um", "--instance", s(&f), "--out", s(&um)]);
    let o = cakecut(&["audit", "--instance", s(&f), "--allocation", s(&um)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("po: pass"));
}

#[test]
fn utilitarian_envy_is_reported() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "utilitarian-envy");
    let um = dir.path().join("um.json");
    let o = cakecut(&["run", "--mechanism", "um", "--instance", s(&f), "--out", s(&um)]);
    assert!(o.status.success());
    assert_eq!(line(&stdout(&o), "cuts"), "0.725");
    let o = cakecut(&["audit", "--instance", s(&f), "--allocation", s(&um), "--checks", "ef"]);
    assert_eq!(o.status.code(), Some(1));
    // a looser tolerance cannot hide an envy gap of about 0.17
    let o = cakecut(&[
        "audit", "--instance", s(&f), "--allocation", s(&um), "--checks", "ef", "--epsilon", "0.1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn prerequisites_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "unequal-slopes");
    for m in ["um", "ll"] {
        let o = cakecut(&["run", "--mechanism", m, "--instance", s(&f)]);
        assert_eq!(o.status.code(), Some(3), "{m}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("common slope"));
    }
    let o = cakecut(&["run", "--mechanism", "envelope", "--instance", s(&f)]);
    assert_eq!(o.status.code(), Some(0));

    let env = dir.path().join("env.json");
    cakecut(&["run", "--mechanism", "envelope", "--instance", s(&f), "--out", s(&env)]);
    let o = cakecut(&["audit", "--instance", s(&f), "--allocation", s(&env), "--checks", "po"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).starts_with("po: inapplicable"));
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    let o = cakecut(&["run", "--mechanism", "ww", "--instance", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{\"version\": 1, \"agents\": [{\"peak\": 2, \"peak_density\": 3}]}").unwrap();
    let o = cakecut(&["run", "--mechanism", "ww", "--instance", s(&garbage)]);
    assert_eq!(o.status.code(), Some(2));

    let f = example(&dir, "figure3");
    let o = cakecut(&["run", "--mechanism", "nope", "--instance", s(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected one of ww, um, ll, mww, envelope"));

    let o = cakecut(&["experiment", "welfare-loss", "--n-min", "5", "--n-max", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn welfare_loss_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("wl.csv");
    let o = cakecut(&["experiment", "welfare-loss", "--n-min", "2", "--n-max", "10", "--csv", s(&out)]);
    assert!(o.status.success());
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["n", "t_po", "t_ww", "wl"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        let n: f64 = r[0].parse().unwrap();
        let wl: f64 = r[3].parse().unwrap();
        assert!((wl - (1.0 - 1.0 / n)).abs() < 1e-9);
    }
}

#[test]
fn compare_writes_one_row_per_mechanism() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "figure3");
    let out = dir.path().join("cmp.csv");
    let o = cakecut(&["compare", "--instance", s(&f), "--csv", s(&out)]);
    assert!(o.status.success());
    assert!(line(&stdout(&o), "dominance").contains("um>ww"));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(reader.headers().unwrap().len(), 10);
    let names: Vec<String> = reader.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(names, ["ww", "um", "ll", "mww"]);
}

#[test]
fn waste_tolerant_flag() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("gap.json");
    fs::write(
        &f,
        r#"{"version": 1, "agents": [{"peak": 0.2, "slope": 20}, {"peak": 0.8, "slope": 20}]}"#,
    )
    .unwrap();
    let o = cakecut(&["run", "--mechanism", "ww", "--instance", s(&f)]);
    assert_ne!(o.status.code(), Some(0));
    let o = cakecut(&["run", "--mechanism", "ww", "--instance", s(&f), "--waste-tolerant"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn render_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "figure3");
    let alloc = dir.path().join("um.json");
    cakecut(&["run", "--mechanism", "um", "--instance", s(&f), "--out", s(&alloc)]);
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    for out in [&a, &b] {
        let o = cakecut(&["render", "--instance", s(&f), "--allocation", s(&alloc), "--out", s(out)]);
        assert!(o.status.success());
    }
    let svg = fs::read_to_string(&a).unwrap();
    assert_eq!(svg, fs::read_to_string(&b).unwrap());
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("class=\"piece").count(), 3);
}

#[test]
fn render_rejects_mismatched_allocation() {
    let dir = TempDir::new().unwrap();
    let f = example(&dir, "figure3");
    let alloc = dir.path().join("two.json");
    fs::write(&alloc, r#"{"version": 1, "pieces": [[[0, 0.5]], [[0.5, 1]]]}"#).unwrap();
    let o = cakecut(&["render", "--instance", s(&f), "--allocation", s(&alloc), "--out", s(&dir.path().join("x.svg"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn disjoint_supports_render_striped_or_solid() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("d.json");
    cakecut(&["example", "disjoint", "--n", "3", "--out", s(&f)]);
    let count = |m: &str| {
        let (alloc, svg) = (dir.path().join(format!("{m}.json")), dir.path().join(format!("{m}.svg")));
        cakecut(&["run", "--mechanism", m, "--instance", s(&f), "--out", s(&alloc)]);
        let o = cakecut(&["render", "--instance", s(&f), "--allocation", s(&alloc), "--out", s(&svg)]);
        assert!(o.status.success());
        fs::read_to_string(&svg).unwrap().matches("class=\"piece").count()
    };
    // one solid triangle per agent
    assert_eq!(count("um"), 3);
    assert!(count("ww") > 3 * 3);
}

#[test]
fn single_agent_compare() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("one.json");
    fs::write(&f, r#"{"version": 1, "agents": [{"peak": 0.5, "peak_density": 2}]}"#).unwrap();
    let o = cakecut(&["compare", "--instance", s(&f)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4, "{text}");
    assert!(rows.iter().all(|l| l.split_whitespace().nth(1) == Some("1")), "{text}");
}
