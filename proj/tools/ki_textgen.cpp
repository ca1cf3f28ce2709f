// Synthetic demo-corpus generator. Emits whitespace-tokenized documents
// separated by blank lines, the format `ki build-corpus` reads.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "ki/errors.hpp"
#include "ki/textgen.hpp"

int main(int argc, char** argv) {
    CLI::App app{"deterministic synthetic text generator"};
    ki::TextgenSpec spec;
    std::string out_path;
    app.add_option("--domain", spec.domain, "text domain: prose or tech")
        ->check(CLI::IsMember({"prose", "tech"}));
    app.add_option("--tokens", spec.target_tokens, "minimum token count")->required();
    app.add_option("--seed", spec.seed, "generator seed");
    app.add_option("--out", out_path, "output text file")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        auto docs = ki::generate_documents(spec);
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "cannot open " << out_path << "\n";
            return 1;
        }
        for (size_t i = 0; i < docs.size(); ++i) {
            if (i) out << "\n";
            out << docs[i] << "\n";
        }
        std::cout << "wrote " << docs.size() << " documents to " << out_path << "\n";
    } catch (const ki::Error& e) {
        std::cerr << e.what() << "\n";
        return e.exit_code();
    }
    return 0;
}
