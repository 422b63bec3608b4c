fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let out = std::path::Path::new(&crate_dir).join("include").join("constructive.h");
    let mut cfg = cbindgen::Config::default();
    cfg.language = cbindgen::Language::C;
    cfg.include_guard = Some("CONSTRUCTIVE_H".into());
    cfg.cpp_compat = true;
    cfg.documentation = true;
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(cfg)
        .generate()
        .expect("cbindgen")
        .write_to_file(out);
    println!("cargo:rerun-if-changed=src/lib.rs");
}
