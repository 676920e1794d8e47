use std::fs;
use std::path::Path;

use backdrop::engine::BackgroundFrame;
use backdrop::error::Error;
use backdrop::io::{
    frame_slice, load_background, load_mask, load_sequence, read_tensor, save_frame, to_gray, write_tensor,
    FrameSequenceSpec, LUMA_WEIGHTS,
};
use backdrop::mrf::ForegroundMask;
use backdrop::tensor::DenseTensor;
use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

fn write_rgb(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) {
    RgbImage::from_fn(w, h, |x, y| Rgb(f(x, y))).save(path).unwrap();
}

#[test]
fn directory_frames_load_in_name_order() {
    let dir = tempfile::tempdir().unwrap();
    for (name, v) in [("f10.png", 30u8), ("f02.png", 20), ("f01.png", 10)] {
        write_rgb(&dir.path().join(name), 4, 3, |x, y| [v, v + x as u8, v + y as u8]);
    }
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let t = load_sequence(&FrameSequenceSpec::directory(dir.path())).unwrap();
    assert_eq!(t.shape(), &[3, 4, 3, 3]);
    assert_eq!(t.get(&[0, 0, 0, 0]), 10.0 / 255.0);
    assert_eq!(t.get(&[0, 0, 0, 1]), 20.0 / 255.0);
    assert_eq!(t.get(&[0, 0, 0, 2]), 30.0 / 255.0);
    assert_eq!(t.get(&[2, 3, 1, 0]), 13.0 / 255.0);
    assert_eq!(t.get(&[2, 3, 2, 0]), 12.0 / 255.0);

    let capped = load_sequence(&FrameSequenceSpec::directory(dir.path()).with_max_frames(Some(2))).unwrap();
    assert_eq!(capped.shape(), &[3, 4, 3, 2]);
}

#[test]
fn manifest_paths_resolve_relative_to_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("frames")).unwrap();
    write_rgb(&dir.path().join("frames/a.png"), 2, 2, |_, _| [0, 0, 0]);
    write_rgb(&dir.path().join("frames/b.png"), 2, 2, |_, _| [255, 255, 255]);
    let manifest = dir.path().join("list.txt");
    fs::write(&manifest, "# order matters\nframes/b.png\n\nframes/a.png\n").unwrap();
    let t = load_sequence(&FrameSequenceSpec::from_path(&manifest)).unwrap();
    assert_eq!(t.shape(), &[2, 2, 3, 2]);
    assert_eq!(t.get(&[0, 0, 0, 0]), 1.0);
    assert_eq!(t.get(&[0, 0, 0, 1]), 0.0);
}

#[test]
fn mismatched_frame_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write_rgb(&dir.path().join("a.png"), 4, 4, |_, _| [1, 2, 3]);
    write_rgb(&dir.path().join("b.png"), 5, 4, |_, _| [1, 2, 3]);
    match load_sequence(&FrameSequenceSpec::directory(dir.path())) {
        Err(Error::Ingestion { path, .. }) => assert!(path.ends_with("b.png")),
        other => panic!("expected ingestion error, got {other:?}"),
    }
}

#[test]
fn unreadable_inputs_are_ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_sequence(&FrameSequenceSpec::directory(dir.path())),
        Err(Error::Ingestion { .. })
    ));
    fs::write(dir.path().join("broken.png"), b"not a png").unwrap();
    match load_sequence(&FrameSequenceSpec::directory(dir.path())) {
        Err(Error::Ingestion { path, .. }) => assert!(path.ends_with("broken.png")),
        other => panic!("expected ingestion error, got {other:?}"),
    }
    assert!(load_sequence(&FrameSequenceSpec::directory(dir.path().join("missing"))).is_err());
}

#[test]
fn gray_and_sixteen_bit_inputs() {
    let dir = tempfile::tempdir().unwrap();
    GrayImage::from_fn(3, 2, |x, _| Luma([(x * 100) as u8])).save(dir.path().join("0.png")).unwrap();
    ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(3, 2, |_, _| Luma([65535u16]))
        .save(dir.path().join("1.png"))
        .unwrap();
    let t = load_sequence(&FrameSequenceSpec::directory(dir.path())).unwrap();
    for c in 0..3 {
        assert_eq!(t.get(&[1, 2, c, 0]), 200.0 / 255.0);
        assert_eq!(t.get(&[0, 0, c, 1]), 1.0);
    }
}

#[test]
fn grayscale_uses_luma_weights() {
    let t = DenseTensor::from_fn(vec![1, 2, 3, 2], |i| (i[1] + i[2] + i[3]) as f64 / 10.0).unwrap();
    let g = to_gray(&t).unwrap();
    for x in 0..2 {
        for k in 0..2 {
            let expect: f64 = (0..3).map(|c| LUMA_WEIGHTS[c] * t.get(&[0, x, c, k])).sum();
            assert!((g.tensor().get(&[0, x, k]) - expect).abs() < 1e-15);
        }
    }
}

#[test]
fn background_png_round_trip_is_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let frame = BackgroundFrame::new(
        DenseTensor::from_fn(vec![5, 7, 3], |i| (i[0] * 7 + i[1]) as f64 / 40.0 + 0.03 * i[2] as f64).unwrap(),
    )
    .unwrap();
    let path = dir.path().join("bg.png");
    save_frame(&frame, &path).unwrap();
    let back = load_background(&path).unwrap();
    assert_eq!(back.tensor().shape(), frame.tensor().shape());
    for (a, b) in back.data().iter().zip(frame.data()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
    }
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
}

#[test]
fn masks_threshold_at_half() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.png");
    GrayImage::from_fn(4, 1, |x, _| Luma([[0u8, 127, 128, 255][x as usize]])).save(&path).unwrap();
    assert_eq!(load_mask(&path).unwrap().labels(), &[false, false, true, true]);

    let mask = ForegroundMask::from_fn(3, 4, |r, c| (r + c) % 2 == 0);
    let out = dir.path().join("out.png");
    save_frame(&mask, &out).unwrap();
    assert_eq!(load_mask(&out).unwrap(), mask);
}

#[test]
fn tensor_files_round_trip_and_reject_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let t = DenseTensor::from_fn(vec![2, 3, 4], |i| i[0] as f64 - 0.25 * i[1] as f64 + 1e-3 * i[2] as f64).unwrap();
    let path = dir.path().join("t.bin");
    write_tensor(&t, &path).unwrap();
    assert_eq!(read_tensor(&path).unwrap(), t);
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], b"DTENSOR1");
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(read_tensor(&path), Err(Error::Data(_))));
}

#[test]
fn frame_slice_extracts_one_frame() {
    let t = DenseTensor::from_fn(vec![2, 2, 3, 4], |i| (i[0] * 100 + i[1] * 10 + i[2]) as f64 + 0.1 * i[3] as f64).unwrap();
    let s = frame_slice(&t, 2).unwrap();
    assert_eq!(s.shape(), &[2, 2, 3]);
    assert_eq!(s.get(&[1, 0, 2]), 102.2);
    assert!(frame_slice(&t, 4).is_err());
}
