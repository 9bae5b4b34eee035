#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "synthetic_fixture.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write the synthetic mock-backend annotation fixture", "gazedecouple-make-fixture"};
    std::string out;
    int samples = 10;
    std::uint64_t seed = 7;
    app.add_option("--out", out, "Fixture directory")->required();
    app.add_option("--samples", samples, "Number of samples")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Generator seed");
    CLI11_PARSE(app, argc, argv);
    gazedecouple::fixture::make_synthetic_fixture(out, samples, seed);
    std::cout << "wrote " << samples << " samples to " << out << '\n';
    return 0;
}
