mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relnn::modelspec::{
    load_model, load_trained, lower, parse, print, serialize_trained, DeclKind, ModelError,
};
use relnn::relcore::{InitRanges, Node, PredicateKind, ValueRange};

const SAMPLE: &str = "\
population user
population movie
predicate Likes(user, movie) bool
predicate Action(movie) bool
predicate Drama(movie) bool
predicate Old(user) bool
latent N1(movie)
unit S1(u: user): w0 * True
                  w1 * Likes(u,m) & Action(m)
                  w2 * Likes(u,m) & N1(m)
unit S2(u: user): w3 * True
                  w4 * Likes(u,m) & Drama(m)
activation H1 = sigmoid(S1)
activation H2 = sigmoid(S2)
unit Out(u: user): w5 * H1(u)
                   w6 * H2(u)
                   w7 * Old(u)
                   w8 * True
mix lambda = 0.05
target Out sigmoid logloss labels Gender
";

#[test]
fn sample_document_structure() {
    let doc = parse(SAMPLE).unwrap();
    let count = |f: fn(&DeclKind) -> bool| doc.decls.iter().filter(|d| f(&d.kind)).count();
    assert_eq!(count(|k| matches!(k, DeclKind::Population { .. })), 2);
    assert_eq!(count(|k| matches!(k, DeclKind::Predicate { .. })), 4);
    assert_eq!(count(|k| matches!(k, DeclKind::Latent { .. })), 1);
    assert_eq!(count(|k| matches!(k, DeclKind::Unit { .. })), 3);
    assert_eq!(count(|k| matches!(k, DeclKind::Activation { .. })), 2);

    let model = lower(&doc).unwrap();
    let s = &model.schema;
    assert_eq!(model.template.weights.len(), 9);
    assert!(model
        .template
        .weights
        .iter()
        .all(|w| !w.frozen && w.init.is_none()));
    assert_eq!(model.template.latents, vec![s.pred_id("N1").unwrap()]);
    let kinds: Vec<&str> = model.graph.nodes.iter().map(Node::kind_name).collect();
    assert_eq!(kinds, ["RLL", "RLL", "RAL", "RAL", "RLL", "RAL", "MIX"]);
    assert_eq!(model.graph.mix_lambda(), Some(0.05));
    let labels = s.pred(model.graph.target.labels);
    assert_eq!(labels.name, "Gender");
    assert_eq!(labels.kind, PredicateKind::ObservedBool);
    assert_eq!(labels.args, vec![s.pop_id("user").unwrap()]);
    let Node::Linear(s1) = &model.graph.nodes[0] else {
        panic!()
    };
    let names: Vec<&str> = s1.vars.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ["u", "m"]);
    assert_eq!(s1.vars[1].pop, s.pop_id("movie").unwrap());
}

#[test]
fn fig1_literal_weights_are_frozen() {
    let text = "\
population person 10
predicate Friend(person, person) bool
predicate Kind(person) bool
unit Happy(x: person): -4.5 * True
    1 * Friend(y,x) & Kind(y)
target Happy sigmoid logloss labels IsHappy
";
    let model = load_model(text).unwrap();
    let units: Vec<_> = model.graph.units().collect();
    assert_eq!(units.len(), 1);
    assert_eq!(units[0].wfs.len(), 2);
    let inits: Vec<_> = model
        .template
        .weights
        .iter()
        .map(|w| (w.init, w.frozen))
        .collect();
    assert_eq!(inits, vec![(Some(-4.5), true), (Some(1.0), true)]);
}

#[test]
fn latent_table_sized_by_population() {
    let text =
        "population movie 7\npopulation user 2\nlatent N1(movie)\npredicate R(user, movie) bool\n\
                unit Q(u: user): a * R(u,m) & N1(m)\ntarget Q identity mse labels Y\n";
    let model = load_model(text).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let store = model
        .template
        .instantiate(&model.schema, InitRanges::default(), &mut rng);
    assert_eq!(store.latents[&model.schema.pred_id("N1").unwrap()].len(), 7);
}

#[test]
fn errors_carry_locations() {
    let err = parse("").unwrap_err();
    assert!(err.message.contains("expected 'population'"), "{err}");

    let err = parse("population user\npredicate Likes(user, movie) bool\n").unwrap_err();
    assert_eq!((err.line, err.col), (2, 23));
    assert!(err.message.contains("unknown population movie"));

    let err = parse("population user\npopulation user\n").unwrap_err();
    assert!(err.message.contains("duplicate declaration"));
    assert_eq!(err.line, 2);

    let err = parse("population a\npredicate P(a, a, a) bool\n").unwrap_err();
    assert!(err.message.contains("arity 3"), "{err}");

    let err = parse("population a\nunit Q(x: a): w * \n").unwrap_err();
    assert_eq!(err.line, 2);

    let err = parse("population a\nunit Q(x: a) w * True\n").unwrap_err();
    assert!(err.expected.contains(&"':'".to_string()));
}

#[test]
fn self_join_surfaces_at_lowering() {
    let text = "population user\npopulation movie\npredicate Likes(user, movie) bool\n\
                unit S1(u: user): 1.0 * Likes(u,m) & Likes(u,k)\ntarget S1 sigmoid logloss labels Y\n";
    let err = load_model(text).unwrap_err();
    assert!(err.to_string().contains("self-join: Likes"), "{err}");
}

#[test]
fn negated_latent_rejected() {
    let text =
        "population a\nlatent N(a)\nunit Q(x: a): w * ~N(x)\ntarget Q identity mse labels Y\n";
    let err = load_model(text).unwrap_err();
    assert!(
        err.to_string().contains("negation of unbounded range: N"),
        "{err}"
    );
}

#[test]
fn no_layers_means_no_target() {
    let err = load_model("population a\npredicate P(a) bool\n").unwrap_err();
    assert_eq!(err, ModelError::NoTarget);
    assert_eq!(err.to_string(), "no target layer");
}

#[test]
fn frozen_and_init_markers() {
    let text = "population a 3\npredicate P(a) bool\nunit Q(x: a): w! * P(x)\n    v * True\n\
                target Q sigmoid logloss labels Y\ninit w = 0.5\n";
    let model = load_model(text).unwrap();
    assert_eq!(model.template.weights[0].init, Some(0.5));
    assert!(model.template.weights[0].frozen);
    assert!(!model.template.weights[1].frozen);
    let bad =
        "population a\nunit Q(x: a): w! * True\n    w * True\ntarget Q identity mse labels Y\n";
    assert!(load_model(bad).unwrap_err().to_string().contains("frozen"));
}

#[test]
fn regression_target_labels_are_real() {
    let text = "population u 3\nunit Q(x: u): w * True\ntarget Q identity mse labels Age\n";
    let model = load_model(text).unwrap();
    let d = model.schema.pred(model.graph.target.labels);
    assert_eq!(
        (d.kind, d.range),
        (PredicateKind::ObservedReal, ValueRange::Real)
    );
}

#[test]
fn trained_format_lines() {
    let text =
        "population movie 3\npopulation user 1\nlatent N1(movie)\npredicate R(user, movie) bool\n\
                unit Q(u: user): w0 * R(u,m) & N1(m)\ntarget Q identity mse labels Y\n";
    let model = load_model(text).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = model
        .template
        .instantiate(&model.schema, InitRanges::default(), &mut rng);
    store.weights[0].value = 0.5;
    let out = serialize_trained(&store, &model.graph, &model.schema).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "weight w0 = 5.00000000000000000e-1");
    assert_eq!(
        lines.iter().filter(|l| l.starts_with("latent N1 ")).count(),
        3
    );
    assert!(lines[1].starts_with("latent N1 0 "));
    let back = load_trained(&out, &model.schema, &model.template).unwrap();
    assert_eq!(back, store);
}

#[test]
fn trained_load_rejects_mismatch() {
    let model =
        load_model("population a 2\nunit Q(x: a): w * True\ntarget Q identity mse labels Y\n")
            .unwrap();
    assert!(load_trained("weight v = 1.0\n", &model.schema, &model.template).is_err());
    assert!(load_trained("", &model.schema, &model.template).is_err());
    assert!(load_trained("weight w = x\n", &model.schema, &model.template).is_err());
}

#[test]
fn movielens_shaped_store_round_trips() {
    let model = load_model(&SAMPLE.replace("population movie", "population movie 40")).unwrap();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let store = model
            .template
            .instantiate(&model.schema, InitRanges::default(), &mut rng);
        let text = serialize_trained(&store, &model.graph, &model.schema).unwrap();
        let back = load_trained(&text, &model.schema, &model.template).unwrap();
        assert_eq!(back, store);
        for (a, b) in back
            .latents
            .values()
            .flatten()
            .zip(store.latents.values().flatten())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn sample_round_trips_through_printer() {
    let doc = parse(SAMPLE).unwrap();
    let again = parse(&print(&doc)).unwrap();
    assert_eq!(again.without_spans(), doc.without_spans());
    assert_eq!(lower(&again).unwrap(), lower(&doc).unwrap());
}

#[test]
fn every_error_location_is_inside_the_input() {
    let inputs = [
        "population",
        "population a\nunit",
        "population a\nunit Q(x: a): w * P(x",
        "population a\n$",
        "population a 1.5",
        "population a\nmix lambda = 2",
        "population a\ntarget Q",
        "population a\nunit Q(x: a):\n",
    ];
    for text in inputs {
        let err = parse(text).unwrap_err();
        let lines: Vec<&str> = text.split('\n').collect();
        assert!(err.line >= 1 && err.line <= lines.len(), "{text:?}: {err}");
        assert!(
            err.col >= 1 && err.col <= lines[err.line - 1].chars().count() + 1,
            "{text:?}: {err}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_documents_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = common::random_document(&mut rng, common::Shape::default());
        let text = print(&doc);
        let parsed = parse(&text).unwrap();
        prop_assert_eq!(parsed.without_spans(), doc.without_spans());
        prop_assert_eq!(print(&parsed), text);
        prop_assert_eq!(lower(&parsed).unwrap(), lower(&doc).unwrap());
    }

    #[test]
    fn parser_never_panics(text in "[a-zA-Z0-9_(),:*&~!=#. \n-]{0,80}") {
        let _ = parse(&text);
    }
}
