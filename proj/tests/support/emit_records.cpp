// Writes random valid attribute records as JSONL: emit_records <out> <count> <seed>
#include <cstdlib>
#include <iostream>

#include "facecap/pipeline.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: emit_records <out.jsonl> <count> <seed>\n";
        return 2;
    }
    facecap::Rng rng(std::strtoull(argv[3], nullptr, 10));
    std::vector<facecap::AttributeRecord> records;
    const auto n = std::strtoull(argv[2], nullptr, 10);
    for (unsigned long long i = 0; i < n; ++i) {
        records.push_back(facecap::testing::random_record(rng, "emit-" + std::to_string(i)));
    }
    facecap::write_records(records, argv[1]);
    return 0;
}
