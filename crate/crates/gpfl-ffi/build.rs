fn main() {
    #[cfg(feature = "generate-header")]
    {
        let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir");
        let header = std::path::Path::new(&crate_dir).join("include/gpfl.h");
        cbindgen::generate(&crate_dir)
            .expect("header generation")
            .write_to_file(header);
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
