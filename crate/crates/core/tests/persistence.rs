use hcolor_core::coding::Coding;
use hcolor_core::colorspace::desaturate;
use hcolor_core::corpus::{generate_corpus, CorpusKind};
use hcolor_core::io::{
    load_checkpoint, load_field, load_image, parse_config, save_checkpoint, save_field, save_gray, save_rgb, Checkpoint,
    FieldDump, RunConfig,
};
use hcolor_core::net::init_model;
use hcolor_core::pipeline::{colorize, predict, train_model};
use hcolor_core::DecodePolicy;

fn quantized(v: f64) -> f64 {
    (v * 255.0).round() / 255.0
}

#[test]
fn images_survive_png_and_pnm() {
    let dir = tempfile::tempdir().unwrap();
    let img = generate_corpus(CorpusKind::Intensity, 1, 9, 3).remove(0);
    for ext in ["png", "ppm"] {
        let path = dir.path().join(format!("x.{ext}"));
        save_rgb(&img, &path).unwrap();
        let back = load_image(&path).unwrap().into_rgb();
        let expect: Vec<f64> = img.data().iter().map(|v| quantized(*v)).collect();
        assert_eq!(back.data(), &expect[..], "{ext}");
    }
    let gray = desaturate(&img);
    for ext in ["png", "pgm"] {
        let path = dir.path().join(format!("g.{ext}"));
        save_gray(&gray, &path).unwrap();
        let back = load_image(&path).unwrap().into_gray();
        assert_eq!(back.dims(), (9, 9));
        assert!(back.data().iter().zip(gray.data()).all(|(a, b)| (a - b).abs() <= 0.5 / 255.0 + 1e-12));
    }
}

#[test]
fn checkpoint_reloads_to_same_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: RunConfig = parse_config("epochs = 1\nbatch_size = 2\nsamples_per_image = 16\n").unwrap();
    let imgs = generate_corpus(CorpusKind::Intensity, 4, 16, 9);
    let (model, report) = train_model(&cfg, &imgs, 1, 4).unwrap();
    assert_eq!(report.epoch_losses.len(), 1);
    let ckpt = Checkpoint::new(cfg, model).unwrap();
    let path = dir.path().join("m.hclr");
    save_checkpoint(&ckpt, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.config, ckpt.config);
    let gray = desaturate(&imgs[0]);
    let policy = DecodePolicy::default();
    // weights are stored as f32
    let a = colorize(&ckpt, &gray, &policy).unwrap();
    let b = colorize(&back, &gray, &policy).unwrap();
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() < 1e-3));
}

#[test]
fn field_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let coding = Coding::hue_chroma();
    let cfg = RunConfig::default();
    let model = init_model(&cfg.net, 2).unwrap();
    let ckpt = Checkpoint::new(cfg, model).unwrap();
    let gray = desaturate(&generate_corpus(CorpusKind::Intensity, 1, 12, 1)[0]);
    let field = predict(&ckpt, &gray).unwrap();
    let path = dir.path().join("f.bin");
    save_field(&FieldDump::from_coding(field.clone(), &coding).unwrap(), &path).unwrap();
    let back = load_field(&path).unwrap();
    assert_eq!(back.field.dims(), field.dims());
    for (a, b) in back.field.channels().iter().zip(field.channels()) {
        assert_eq!(a.name, b.name);
        assert!(a.data.iter().zip(&b.data).all(|(x, y)| (x - y).abs() < 1e-6));
    }
}

#[test]
fn config_text_round_trips() {
    let cfg = parse_config("variant = lab_joint_hist\nbins = 16\nlr = 0.05\nrebalance = false\n").unwrap();
    assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    assert!(parse_config("nonsense = 1\n").is_err());
}

#[test]
fn documented_config_parses() {
    let text = "variant = hue_chroma_hist\nbins = 32\nsigma = 25\nlambda_h = 5\nregion = 1\nlr = 0.1\n\
                batch_size = 1\nepochs = 10\nrebalance = true\nsamples_per_image = 128\nhead_width = 64\n\
                layer = c1, 1, 8, 3, 1, 2\nlayer = c2, 8, 8, 3, 1, 1\ntaps = data, c2\n";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.net.layers.len(), 2);
    assert_eq!(cfg.net.taps, vec!["data".to_string(), "c2".to_string()]);
}
