use std::collections::BTreeSet;
use std::fs;

use proptest::prelude::*;

use relnn::data::{
    add_saturating_objects, age_midpoint, bind, convert_movielens, split, truncate_relations,
    write_movielens_like, DataError, Dataset, Fact, MovieLensFiles, Truncation,
};
use relnn::engine::{BinaryRelation, Cell, Interpretation};
use relnn::learn::LabelSet;
use relnn::modelspec::load_model;
use relnn::relcore::PredId;

const TOY_MODEL: &str = "\
population user
population movie
predicate Likes(user, movie) bool
predicate Action(movie) bool
unit Q(u: user): w0 * True
    w1 * Likes(u,m) & Action(m)
target Q sigmoid logloss labels Gender
";

fn write(dir: &std::path::Path, files: &[(&str, &str)]) {
    for (name, text) in files {
        let path = dir.join(name);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
}

fn toy_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        &[
            ("populations.tsv", "user\t2\nmovie\t2\n"),
            ("objects/user.tsv", "ann\nbob\n"),
            ("objects/movie.tsv", "m1\nm2\n"),
            ("facts/Likes.tsv", "ann\tm1\nann\tm2\t1\nbob\tm2\t1\t5\n"),
            ("facts/Action.tsv", "# comment\nm1\t1\n"),
            ("labels.tsv", "Gender\tann\t1\nGender\tbob\t0\n"),
        ],
    );
    dir
}

#[test]
fn toy_fixture_binds_to_sparse_relation() {
    let dir = toy_dir();
    let ds = Dataset::load(dir.path()).unwrap();
    let mut model = load_model(TOY_MODEL).unwrap();
    let bound = bind(&ds, &mut model.schema, &model.graph).unwrap();
    let likes = model.schema.pred_id("Likes").unwrap();
    assert_eq!(bound.interp.binary[&likes].len(), 3);
    let action = model.schema.pred_id("Action").unwrap();
    assert_eq!(bound.interp.unary[&action], vec![1.0, 0.0]);
    let labels = bound.target_labels(&model.graph);
    assert_eq!(labels.objects, vec![0, 1]);
    assert_eq!(labels.values, vec![1.0, 0.0]);
    assert_eq!(
        model
            .schema
            .pop(model.schema.pop_id("user").unwrap())
            .object_name(1),
        "bob"
    );
}

#[test]
fn unknown_object_names_file_and_line() {
    let dir = toy_dir();
    write(dir.path(), &[("facts/Likes.tsv", "ann\tm1\nann\tm9\n")]);
    let ds = Dataset::load(dir.path()).unwrap();
    let mut model = load_model(TOY_MODEL).unwrap();
    let err = bind(&ds, &mut model.schema, &model.graph).unwrap_err();
    let DataError::UnknownObject {
        file, line, object, ..
    } = &err
    else {
        panic!("{err}")
    };
    assert_eq!(
        (file.as_str(), *line, object.as_str()),
        ("facts/Likes.tsv", 2, "m9")
    );
}

#[test]
fn load_errors() {
    let model = load_model(TOY_MODEL).unwrap();
    let cases = [
        ("facts/Likes.tsv", "ann\tm1\nann\tm1\n", "duplicate fact"),
        ("facts/Likes.tsv", "ann\tm1\tyes\n", "non-numeric"),
        ("facts/Action.tsv", "m1\tm2\t1\n", "arity mismatch"),
        ("facts/Action.tsv", "m1\t0.5\n", "boolean predicate"),
        ("labels.tsv", "Gender\tann\t2\n", "boolean label"),
    ];
    for (file, text, needle) in cases {
        let dir = toy_dir();
        write(dir.path(), &[(file, text)]);
        let err = Dataset::load(dir.path())
            .and_then(|ds| bind(&ds, &mut model.schema.clone(), &model.graph))
            .unwrap_err();
        assert!(err.to_string().contains(needle), "{file}: {err}");
    }
    let dir = toy_dir();
    fs::remove_file(dir.path().join("facts/Action.tsv")).unwrap();
    let ds = Dataset::load(dir.path()).unwrap();
    let err = bind(&ds, &mut model.schema.clone(), &model.graph).unwrap_err();
    assert!(err.to_string().contains("facts/Action.tsv"), "{err}");
}

#[test]
fn save_then_load_is_identity() {
    let dir = toy_dir();
    let ds = Dataset::load(dir.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    ds.save(out.path()).unwrap();
    let again = Dataset::load(out.path()).unwrap();
    let strip = |d: &Dataset| {
        let mut d = d.clone();
        for facts in d.facts.values_mut().chain(d.labels.values_mut()) {
            for f in facts.iter_mut() {
                f.line = 0;
            }
            facts.sort_by(|a, b| a.fields.cmp(&b.fields));
        }
        d
    };
    assert_eq!(strip(&again), strip(&ds));
    let out2 = tempfile::tempdir().unwrap();
    again.save(out2.path()).unwrap();
    for f in [
        "populations.tsv",
        "labels.tsv",
        "facts/Likes.tsv",
        "objects/user.tsv",
    ] {
        assert_eq!(
            fs::read(out.path().join(f)).unwrap(),
            fs::read(out2.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

fn labels(n: usize) -> LabelSet {
    LabelSet::new((0..n).collect(), (0..n).map(|i| (i % 2) as f64).collect())
}

#[test]
fn split_sizes_and_reproducibility() {
    let l = labels(10);
    let a = split(&l, 0.8, 3, &BTreeSet::new()).unwrap();
    assert_eq!((a.train.len(), a.test.len()), (8, 2));
    assert_eq!(a, split(&l, 0.8, 3, &BTreeSet::new()).unwrap());
    let b = split(&l, 0.8, 4, &BTreeSet::new()).unwrap();
    assert_eq!((b.train.len(), b.test.len()), (8, 2));
    let c = split(&labels(100), 0.8, 3, &BTreeSet::new()).unwrap();
    let d = split(&labels(100), 0.8, 4, &BTreeSet::new()).unwrap();
    assert_ne!(c.test.objects, d.test.objects);
    assert!(matches!(
        split(&l, 1.0, 3, &BTreeSet::new()),
        Err(DataError::EmptyTestSet)
    ));
    assert_eq!(
        split(&l, 1.0, 3, &BTreeSet::new()).unwrap_err().to_string(),
        "empty test set"
    );
    assert!(matches!(
        split(&labels(1), 0.8, 3, &BTreeSet::new()),
        Err(DataError::TooFewLabels(1))
    ));
}

#[test]
fn synthetic_objects_always_train() {
    let syn: BTreeSet<usize> = [0, 1].into();
    for seed in 0..20 {
        let s = split(&labels(12), 0.8, seed, &syn).unwrap();
        assert!(s.train.objects.contains(&0) && s.train.objects.contains(&1));
        assert_eq!(s.test.len(), 2);
    }
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 2usize..60, fraction in 0.0f64..0.95, seed in any::<u64>()) {
        let l = labels(n);
        let s = split(&l, fraction, seed, &BTreeSet::new()).unwrap();
        let train: BTreeSet<usize> = s.train.objects.iter().copied().collect();
        let test: BTreeSet<usize> = s.test.objects.iter().copied().collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(train.len() + test.len(), n);
        prop_assert_eq!(train.len(), (fraction * n as f64).floor() as usize);
        for (o, y) in s.train.iter().chain(s.test.iter()) {
            prop_assert_eq!(y, (o % 2) as f64);
        }
    }

    #[test]
    fn truncation_is_idempotent(k in 0usize..6, seed in any::<u64>()) {
        let (interp, p) = ratings(seed);
        let rows: BTreeSet<usize> = (0..4).collect();
        let once = truncate_relations(&interp, p, &rows, Truncation::First(k));
        let twice = truncate_relations(&once, p, &rows, Truncation::First(k));
        prop_assert_eq!(once, twice);
    }
}

fn ratings(seed: u64) -> (Interpretation, PredId) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    for r in 0..4u32 {
        for c in 0..5u32 {
            if rng.random_bool(0.6) {
                cells.push(Cell {
                    row: r,
                    col: c,
                    value: 1.0,
                    key: rng.random_range(0..3),
                });
            }
        }
    }
    let mut interp = Interpretation::new();
    interp.insert_binary(PredId(0), BinaryRelation::new(4, 5, cells).unwrap());
    interp.insert_unary(PredId(1), vec![1.0; 4]);
    (interp, PredId(0))
}

#[test]
fn truncation_keeps_earliest_cells() {
    let cells = vec![
        Cell {
            row: 0,
            col: 0,
            value: 1.0,
            key: 30,
        },
        Cell {
            row: 0,
            col: 1,
            value: 1.0,
            key: 10,
        },
        Cell {
            row: 0,
            col: 2,
            value: 1.0,
            key: 20,
        },
        Cell {
            row: 1,
            col: 0,
            value: 1.0,
            key: 5,
        },
    ];
    let mut interp = Interpretation::new();
    interp.insert_binary(PredId(0), BinaryRelation::new(2, 3, cells).unwrap());
    let user0: BTreeSet<usize> = [0].into();
    let k1 = truncate_relations(&interp, PredId(0), &user0, Truncation::First(1));
    let rel = &k1.binary[&PredId(0)];
    assert_eq!(
        rel.row(0).iter().map(|c| c.col).collect::<Vec<_>>(),
        vec![1]
    );
    assert_eq!(rel.row(1).len(), 1);
    let k0 = truncate_relations(&interp, PredId(0), &user0, Truncation::First(0));
    assert!(k0.binary[&PredId(0)].row(0).is_empty());
    let all: BTreeSet<usize> = [0, 1].into();
    assert_eq!(
        truncate_relations(&interp, PredId(0), &all, Truncation::First(3)),
        interp
    );
}

#[test]
fn random_truncation_is_seeded_and_bounded() {
    let (interp, p) = ratings(9);
    let rows: BTreeSet<usize> = (0..4).collect();
    let a = truncate_relations(
        &interp,
        p,
        &rows,
        Truncation::RandomUpTo { max: 2, seed: 1 },
    );
    assert_eq!(
        a,
        truncate_relations(
            &interp,
            p,
            &rows,
            Truncation::RandomUpTo { max: 2, seed: 1 }
        )
    );
    for r in 0..4 {
        assert!(a.binary[&p].row(r).len() <= 2);
    }
    assert_eq!(a.unary, interp.unary);
}

#[test]
fn saturating_objects() {
    let dir = toy_dir();
    let mut ds = Dataset::load(dir.path()).unwrap();
    write(
        dir.path(),
        &[
            ("populations.tsv", "user\t2\nmovie\t5\n"),
            ("objects/movie.tsv", "m1\nm2\nm3\nm4\nm5\n"),
        ],
    );
    let mut ds5 = Dataset::load(dir.path()).unwrap();
    let added = add_saturating_objects(&mut ds5, "Likes", "user", "movie", "Gender").unwrap();
    assert_eq!(added.len(), 2);
    assert_eq!(ds5.fact_count("Likes"), 3 + 10);

    add_saturating_objects(&mut ds, "Likes", "user", "movie", "Gender").unwrap();
    let err = add_saturating_objects(&mut ds, "Likes", "user", "movie", "Gender").unwrap_err();
    assert!(err.to_string().contains("already exists"), "{err}");

    let mut model = load_model(TOY_MODEL).unwrap();
    let bound = bind(&ds5, &mut model.schema, &model.graph).unwrap();
    let labels = bound.target_labels(&model.graph);
    let user = model.schema.pop_id("user").unwrap();
    let syn = &bound.synthetic[&user];
    assert_eq!(syn.len(), 2);
    let likes = model.schema.pred_id("Likes").unwrap();
    for &o in syn {
        assert_eq!(bound.interp.binary[&likes].row(o).len(), 5);
    }
    let s = split(&labels, 0.5, 0, syn).unwrap();
    assert!(s.test.objects.iter().all(|o| !syn.contains(o)));
    assert_eq!(s.train.len(), 1 + 2);
    let real_train: f64 = s
        .train
        .iter()
        .filter(|(o, _)| !syn.contains(o))
        .map(|(_, y)| y)
        .sum();
    let expected_mean = (real_train + 0.0 + 1.0) / 3.0;
    assert!((s.train.mean().unwrap() - expected_mean).abs() < 1e-15);
}

#[test]
fn age_midpoints() {
    assert_eq!(age_midpoint(1), Some(16.0));
    assert_eq!(age_midpoint(25), Some(29.5));
    assert_eq!(age_midpoint(56), Some(60.0));
    assert_eq!(age_midpoint(2), None);
}

#[test]
fn convert_raw_files() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        &[
            ("users.dat", "2::F::25::7::55117\n1::M::1::10::48067\n"),
            ("movies.dat", "1::Toy Story (1995)::Animation|Children's|Comedy\n2::Heat (1995)::Action|Crime|Thriller\n3::Casino (1995)::Drama|Thriller\n"),
            ("ratings.dat", "1::2::4::978300760\n1::3::1::978300001\n2::1::5::978302109\n"),
        ],
    );
    fs::write(
        dir.path().join("movies.dat"),
        b"1::Caf\xe9 (1995)::Comedy\n2::Heat (1995)::Action|Crime\n3::Casino (1995)::Drama\n",
    )
    .unwrap();
    let ds = convert_movielens(&MovieLensFiles::in_dir(dir.path())).unwrap();
    assert_eq!(ds.populations["user"], vec!["1", "2"]);
    assert_eq!(ds.populations["movie"], vec!["1", "2", "3"]);
    assert_eq!(ds.fact_count("Likes"), 3);
    assert!(ds.facts["Likes"].contains(&Fact::new(&["1", "2"], 1.0, Some(978300760))));
    assert_eq!(ds.facts["Action"], vec![Fact::new(&["2"], 1.0, None)]);
    assert_eq!(ds.facts["Drama"], vec![Fact::new(&["3"], 1.0, None)]);
    assert_eq!(ds.facts["Occ10"], vec![Fact::new(&["1"], 1.0, None)]);
    assert_eq!(ds.facts["Age25"], vec![Fact::new(&["2"], 1.0, None)]);
    assert_eq!(ds.facts["Male"], vec![Fact::new(&["1"], 1.0, None)]);
    assert!(ds.facts["Occ0"].is_empty());
    let label = |pred: &str, obj: &str| {
        ds.labels[pred]
            .iter()
            .find(|f| f.fields[0] == obj)
            .map(|f| f.fields[1].clone())
            .unwrap()
    };
    assert_eq!(label("Gender", "1"), "1");
    assert_eq!(label("Gender", "2"), "0");
    assert_eq!(label("AgeMid", "1"), "16");
    assert_eq!(label("AgeMid", "2"), "29.5");

    fs::write(dir.path().join("ratings.dat"), "1::2::4\n").unwrap();
    let err = convert_movielens(&MovieLensFiles::in_dir(dir.path())).unwrap_err();
    assert!(err.to_string().contains("ratings.dat:1"), "{err}");
}

#[test]
fn movielens_like_fixture_converts_and_binds() {
    let dir = tempfile::tempdir().unwrap();
    let files = write_movielens_like(dir.path(), 40, 25, 3).unwrap();
    assert!(files.exist());
    let ds = convert_movielens(&files).unwrap();
    let out = tempfile::tempdir().unwrap();
    ds.save(out.path()).unwrap();
    let ds = Dataset::load(out.path()).unwrap();
    assert_eq!(ds.populations["user"].len(), 40);
    let model = relnn::experiment::movielens_template(relnn::experiment::Task::Gender, 2, 2);
    let p = relnn::experiment::Prepared::new(&model, &ds).unwrap();
    assert_eq!(p.labels.len(), 40);
    let dir2 = tempfile::tempdir().unwrap();
    let again = write_movielens_like(dir2.path(), 40, 25, 3).unwrap();
    assert_eq!(
        fs::read(&again.ratings).unwrap(),
        fs::read(&files.ratings).unwrap()
    );
}
