// Condition numbers of a hand-built system and of a few random ones.
//
//   condition_demo [seed]

#include <cstdlib>
#include <iomanip>
#include <iostream>

#include <polycond/polycond.hpp>

using namespace polycond;

int main(int argc, char** argv) {
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;

    // f = x0 x1 in two variables: the smallest value of sigma^2 + f^2 on the
    // circle is 1/4, attained midway between the coordinate axes.
    HomogeneousPoly p(2, 2);
    p.set_coeff(MultiIndex{{1, 1}}, 1.0);
    const PolySystem xy(std::vector<HomogeneousPoly>{p});
    const ConditionReport r = condition_numbers(xy);
    std::cout << std::setprecision(8) << "x0*x1: kappa_tilde = " << r.kappa_tilde << " (sqrt 2 = " << std::sqrt(2.0)
              << "), L_underline = " << r.L_underline << ", kappa = " << r.kappa << "\n\n";

    const int n = 3;
    const std::vector<int> degrees{2, 2, 2};
    const auto c = constants_K_a(n, degrees);
    std::cout << "random systems, n = 3, degrees 2,2,2 (K = " << c.K << ")\n";
    std::cout << std::setw(4) << "i" << std::setw(14) << "kappa_tilde" << std::setw(14) << "kappa" << std::setw(14)
              << "L_underline" << std::setw(12) << "||f||^2" << '\n';
    for (std::uint64_t i = 0; i < 5; ++i) {
        RngStream rng(seed, make_stream_id(StreamTag::system, i));
        const PolySystem f = sample_system(degrees, n, rng);
        OptimizerOptions opt;
        opt.seed = seed;
        opt.stream_id = make_stream_id(StreamTag::optimizer_starts, i);
        const ConditionReport q = condition_numbers(f, opt);
        const double w = f.norms().l2_weyl;
        std::cout << std::setw(4) << i << std::setw(14) << q.kappa_tilde << std::setw(14) << q.kappa << std::setw(14)
                  << q.L_underline << std::setw(12) << w * w << '\n';
    }
}
