use srelu::formats::cifar::{self, CifarBatch, RECORD_BYTES};
use srelu::formats::idx::{self, IdxImages};
use srelu::formats::{params, FormatError, Split};
use srelu_core::nn::{ArchId, ArchitectureSpec, Model};

fn idx_images_fixture() -> Vec<u8> {
    let (n, r, c) = (3u32, 4u32, 5u32);
    let mut b = Vec::new();
    for v in [0x803u32, n, r, c] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend((0..n * r * c).map(|i| (i * 37 % 256) as u8));
    b
}

fn idx_labels_fixture() -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&0x801u32.to_be_bytes());
    b.extend_from_slice(&3u32.to_be_bytes());
    b.extend_from_slice(&[7, 0, 9]);
    b
}

fn cifar_fixture(n: usize) -> Vec<u8> {
    let mut b = Vec::new();
    for i in 0..n {
        b.push((i % 10) as u8);
        b.extend((0..RECORD_BYTES - 1).map(|j| ((i * 131 + j * 7) % 256) as u8));
    }
    b
}

#[test]
fn idx_round_trip_is_byte_exact() {
    let img = idx_images_fixture();
    let parsed = idx::parse_images(&img).unwrap();
    assert_eq!((parsed.count, parsed.rows, parsed.cols), (3, 4, 5));
    assert_eq!(idx::encode_images(&parsed), img);

    let lbl = idx_labels_fixture();
    let labels = idx::parse_labels(&lbl).unwrap();
    assert_eq!(labels, vec![7, 0, 9]);
    assert_eq!(idx::encode_labels(&labels), lbl);

    // Through the float image set and back.
    let set = idx::to_set("mnist", &parsed, &labels).unwrap();
    assert_eq!(set.image_shape(), &[1, 4, 5]);
    let (back, back_labels) = idx::from_set(&set).unwrap();
    assert_eq!(idx::encode_images(&back), img);
    assert_eq!(idx::encode_labels(&back_labels), lbl);
}

#[test]
fn idx_rejects_malformed_input() {
    let mut img = idx_images_fixture();
    img[3] = 0x01;
    assert!(matches!(idx::parse_images(&img), Err(FormatError::BadMagic { found: 0x801, expected: 0x803, .. })));

    let img = idx_images_fixture();
    assert!(matches!(idx::parse_images(&img[..img.len() - 1]), Err(FormatError::Truncated { .. })));
    assert!(matches!(idx::parse_images(&img[..10]), Err(FormatError::Truncated { .. })));
    let mut long = img.clone();
    long.push(0);
    assert!(matches!(idx::parse_images(&long), Err(FormatError::TrailingBytes { extra: 1, .. })));

    let mut lbl = idx_labels_fixture();
    assert!(matches!(idx::parse_images(&lbl), Err(FormatError::BadMagic { .. })));
    lbl[9] = 10;
    assert!(matches!(idx::parse_labels(&lbl), Err(FormatError::BadLabel { label: 10, index: 1, .. })));
    assert!(matches!(idx::parse_labels(&idx_labels_fixture()[..9]), Err(FormatError::Truncated { .. })));

    let images = IdxImages { count: 2, rows: 1, cols: 1, pixels: vec![0, 255] };
    assert!(matches!(idx::to_set("mnist", &images, &[1]), Err(FormatError::CountMismatch { images: 2, labels: 1 })));
}

#[test]
fn cifar_round_trip_is_byte_exact() {
    let bytes = cifar_fixture(4);
    let batch = cifar::parse_batch(&bytes).unwrap();
    assert_eq!(batch.labels, vec![0, 1, 2, 3]);
    assert_eq!(cifar::encode_batch(&batch), bytes);
    let set = cifar::to_set("cifar10", &batch).unwrap();
    assert_eq!(set.image_shape(), &[3, 32, 32]);
    // Channel-major layout: first red byte, first green byte.
    assert_eq!(set.images().item_slice(1)[0], bytes[RECORD_BYTES + 1] as f32 / 255.0);
    assert_eq!(set.images().item_slice(1)[1024], bytes[RECORD_BYTES + 1 + 1024] as f32 / 255.0);
    assert_eq!(cifar::encode_batch(&cifar::from_set(&set).unwrap()), bytes);
}

#[test]
fn cifar_rejects_malformed_input() {
    let bytes = cifar_fixture(2);
    assert!(matches!(
        cifar::parse_batch(&bytes[..bytes.len() - 5]),
        Err(FormatError::RecordLength { record: RECORD_BYTES, .. })
    ));
    let mut bad = bytes.clone();
    bad[RECORD_BYTES] = 11;
    assert!(matches!(cifar::parse_batch(&bad), Err(FormatError::BadLabel { label: 11, index: 1, .. })));
    assert_eq!(cifar::parse_batch(&[]).unwrap(), CifarBatch::default());
}

#[test]
fn loaders_read_what_savers_write() {
    let dir = tempfile::tempdir().unwrap();
    let parsed = idx::parse_images(&idx_images_fixture()).unwrap();
    let set = idx::to_set("mnist", &parsed, &[7, 0, 9]).unwrap();
    idx::save_mnist(dir.path(), Split::Test, &set).unwrap();
    let back = idx::load_mnist(dir.path(), Split::Test).unwrap();
    assert_eq!(back.images().data(), set.images().data());
    assert_eq!(back.labels(), set.labels());

    let batch = cifar::to_set("cifar10", &cifar::parse_batch(&cifar_fixture(3)).unwrap()).unwrap();
    cifar::save_batch(&dir.path().join(cifar::TEST_FILE), &batch).unwrap();
    let back = cifar::load_cifar10(dir.path(), Split::Test).unwrap();
    assert_eq!(back.labels(), &[0, 1, 2]);

    let err = idx::load_mnist(&dir.path().join("missing"), Split::Train).unwrap_err();
    assert!(matches!(err, FormatError::Io { .. }), "{err}");
}

#[test]
fn params_round_trip() {
    for (arch, seed) in [(ArchId::MnistCnn, 3), (ArchId::Cifar10Cnn1, 4), (ArchId::Cifar10Cnn2, 5)] {
        let mut model: Model<f32> = Model::build(ArchitectureSpec::from_id(arch).unwrap(), seed).unwrap();
        model.slope.train_slope = 2.5;
        let bytes = params::encode(&model).unwrap();
        let back = params::decode(&bytes).unwrap();
        assert_eq!(back.spec().id, arch);
        assert_eq!(back.slope.train_slope, 2.5);
        assert_eq!(back.params().len(), model.params().len());
        for (a, b) in back.params().iter().zip(model.params()) {
            assert_eq!(a.value.data(), b.value.data());
        }
        assert_eq!(params::encode(&back).unwrap(), bytes);
    }
}

#[test]
fn params_rejects_malformed_input() {
    let model: Model<f32> = Model::build(ArchitectureSpec::from_id(ArchId::MnistCnn).unwrap(), 1).unwrap();
    let bytes = params::encode(&model).unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(params::decode(&bad), Err(FormatError::BadMagic { .. })));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(params::decode(&bad), Err(FormatError::Version { found: 9, .. })));
    assert!(matches!(params::decode(&bytes[..bytes.len() - 3]), Err(FormatError::Truncated { .. })));
    let mut long = bytes.clone();
    long.extend_from_slice(&[0, 0]);
    assert!(matches!(params::decode(&long), Err(FormatError::TrailingBytes { extra: 2, .. })));
}
