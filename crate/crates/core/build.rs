// The full-corpus acceptance test runs only when its data directory is set.
fn main() {
    println!("cargo::rustc-check-cfg=cfg(bhdeskew_magnet)");
    println!("cargo::rerun-if-env-changed=BH_DESKEW_MAGNET_3C90");
    if std::env::var_os("BH_DESKEW_MAGNET_3C90").is_some() {
        println!("cargo::rustc-cfg=bhdeskew_magnet");
    }
}
