fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");

    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.cpp_compat = true;
    config.include_guard = Some("VOLTERRA_YOUNG_H".to_string());
    config.documentation = true;
    config.usize_is_size_t = true;
    config.enumeration.prefix_with_name = true;
    config.header = Some(
        "/* C interface to the volterra-young numerical library.\n\
         * Generated by cbindgen from crates/ffi/src/lib.rs — do not edit. */"
            .to_string(),
    );

    // `write_to_file` leaves the committed header untouched when nothing
    // changed, so incremental builds stay clean.
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation failed")
        .write_to_file(format!("{crate_dir}/include/volterra_young.h"));
}
