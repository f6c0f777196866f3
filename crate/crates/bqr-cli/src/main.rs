fn main() {
    println!("bqr placeholder");
}
