//! Prints the operation-count tables for 1080p upscaling.

use vidsr::cost::{architecture_table, benchmark_table, HD_1080P};

fn main() {
    println!("Architectures, x3 to 1080p:");
    for row in architecture_table(HD_1080P).unwrap() {
        println!(
            "  {:>2} layers  {:<6} {:>8.2} GOps  ({} ops)",
            row.layer_count, row.network, row.gops, row.total_ops
        );
    }
    println!();
    println!("Benchmark networks:");
    for row in benchmark_table(HD_1080P).unwrap() {
        println!(
            "  x{}  {:<20} {:>8.2} GOps",
            row.scale, row.network, row.gops
        );
    }
}
