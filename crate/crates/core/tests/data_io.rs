use propnsm::data::{load_dataset, load_embeddings, SemanticTable, Vocab};
use propnsm::math::Mat;
use propnsm::Error;
use proptest::prelude::*;

fn table(labels: Vec<String>, vectors: Mat) -> SemanticTable {
    SemanticTable::new(Vocab::from_labels(labels).unwrap(), vectors).unwrap()
}

proptest! {
    #[test]
    fn embeddings_round_trip_bit_exact(
        entries in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 6)
    ) {
        let t = table(vec!["a".into(), "b".into()], Mat::from_row_slice(2, 3, &entries));
        let back = SemanticTable::parse_word2vec(&t.to_word2vec()).unwrap();
        for (x, y) in t.vectors.iter().zip(back.vectors.iter()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(back.vocab.labels(), t.vocab.labels());
    }
}

#[test]
fn files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let t = table(
        vec!["cat".into(), "dog".into()],
        Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
    );
    let emb = dir.path().join("emb.txt");
    t.save(&emb).unwrap();
    let loaded = load_embeddings(&emb).unwrap();
    assert_eq!(loaded, t);

    let csv = dir.path().join("data.csv");
    std::fs::write(&csv, "label,a,b\ndog,1,2\ncat,3,4\ndog,5,6\n").unwrap();
    let ds = load_dataset(&csv, &loaded).unwrap();
    assert_eq!(ds.classes.labels(), ["dog", "cat"]);
    assert_eq!(ds.instances.len(), 3);

    std::fs::write(&csv, "label,a,b\nbird,1,2\n").unwrap();
    assert_eq!(
        load_dataset(&csv, &loaded).unwrap_err(),
        Error::Coverage(vec!["bird".into()])
    );
    assert!(matches!(
        load_embeddings(dir.path().join("missing.txt")),
        Err(Error::Io(_))
    ));
}
