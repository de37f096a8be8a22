use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR is set by cargo"));
    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("readable cbindgen.toml");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    match cbindgen::generate_with_config(&crate_dir, config) {
        // only rewrites the header when its contents change
        Ok(bindings) => {
            bindings.write_to_file(crate_dir.join("include").join("lamperti_kit.h"));
        }
        Err(e) => println!("cargo:warning=header not regenerated: {e}"),
    }
}
