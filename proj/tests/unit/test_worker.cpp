#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "ruperlb/worker.hpp"

using namespace ruperlb;

TEST_SUITE("worker") {

TEST_CASE("working follows the started and finished flags") {
    Worker w;
    CHECK_FALSE(w.working());
    w.start(0.0, 10);
    CHECK(w.working());
    w.finish();
    CHECK_FALSE(w.working());
}

TEST_CASE("elapsed is measured from the last report") {
    Worker w;
    w.start(10.0, 100);
    CHECK(w.elapsed(25.0) == doctest::Approx(15.0));
    CHECK(w.elapsed(10.0) == 0.0);
    CHECK_THROWS_AS(w.elapsed(5.0), ClockRegression);
}

TEST_CASE("speed is the latest measure") {
    Worker w;
    w.start(0.0, 1000);
    CHECK(w.speed() == 0.0);
    w.add_measure(10.0, 50);
    CHECK(w.speed() == doctest::Approx(5.0));
    w.add_measure(20.0, 130);
    CHECK(w.speed() == doctest::Approx(8.0));
    REQUIRE(w.measures().size() == 2);
    CHECK(w.measures()[0] == SpeedMeasure{10.0, 5.0});
    CHECK(w.measures()[1] == SpeedMeasure{20.0, 8.0});
}

TEST_CASE("add_measure returns the ratio to the previous speed") {
    Worker v;
    v.start(-10.0, 10000);
    v.add_measure(-5.0, 0);
    v.add_measure(0.0, 50); // 10 it/s, t_r = 0, I_d = 50
    const double dev = v.add_measure(10.0, 200);
    CHECK(v.speed() == doctest::Approx(15.0));
    CHECK(dev == doctest::Approx(1.5));
    CHECK(v.measures().back().elapsed_since_start == doctest::Approx(20.0));

    SUBCASE("unchanged speed") {
        CHECK(v.add_measure(20.0, 350) == doctest::Approx(1.0));
    }
}

TEST_CASE("the first measure has no deviation") {
    Worker w;
    w.start(0.0, 100);
    CHECK(w.add_measure(10.0, 50) == 1.0);
    CHECK(w.speed() == doctest::Approx(5.0));
}

TEST_CASE("add_measure rejects regressions") {
    Worker w;
    w.start(0.0, 100);
    w.add_measure(10.0, 50);
    CHECK_THROWS_AS(w.add_measure(10.0, 60), ClockRegression);
    CHECK_THROWS_AS(w.add_measure(5.0, 60), ClockRegression);
    CHECK_THROWS_AS(w.add_measure(20.0, 40), ProgressRegression);
}

TEST_CASE("pred_done extrapolates linearly") {
    Worker w;
    w.start(0.0, 1000);
    w.add_measure(10.0, 100); // 10 it/s
    CHECK(w.pred_done(15.0) == doctest::Approx(150.0));
    CHECK(w.pred_done(10.0) == doctest::Approx(100.0));

    Worker idle;
    idle.start(0.0, 10);
    CHECK(idle.pred_done(50.0) == 0.0);

    w.finish();
    CHECK(w.pred_done(100.0) == doctest::Approx(100.0));
}

TEST_CASE("guess worker follows the prediction error") {
    auto primed = [](double speed, Iterations done) {
        GuessWorker g;
        g.start(0.0, 0);
        g.add_measure(10.0, done); // first measure: speed = done / 10
        REQUIRE(g.speed() == doctest::Approx(speed));
        return g;
    };

    SUBCASE("faster than expected") {
        auto g = primed(20.0, 200);
        const double dev = g.add_measure(20.0, 500);
        CHECK(dev == doctest::Approx(1.5));
        CHECK(g.speed() == doctest::Approx(30.0));
        CHECK(g.done() == 500);
    }
    SUBCASE("prediction regressed") {
        auto g = primed(40.0, 400);
        const double dev = g.add_measure(20.0, 300);
        CHECK(dev == doctest::Approx(0.375));
        CHECK(g.speed() == doctest::Approx(15.0));
        CHECK(g.done() == 300);
    }
    SUBCASE("zero speed behaves like a thread worker") {
        GuessWorker g;
        g.start(0.0, 0);
        Worker w;
        w.start(0.0, 0);
        CHECK(g.add_measure(10.0, 70) == w.add_measure(10.0, 70));
        CHECK(g.speed() == w.speed());
        CHECK(g.measures() == w.measures());
    }
    SUBCASE("regression compares mean speeds since start") {
        auto g = primed(10.0, 100);
        CHECK(g.add_measure(20.0, 50) == doctest::Approx(0.25));
        CHECK(g.speed() == doctest::Approx(2.5));
    }
    SUBCASE("a regression while the speed is zero clamps the speed at zero") {
        GuessWorker g;
        g.start(0.0, 0);
        g.add_measure(10.0, 0);
        g.add_measure(20.0, 0);
        CHECK(g.speed() == 0.0);
        g.register_prediction(80);
        g.add_measure(30.0, 40);
        CHECK(g.speed() == 0.0);
        CHECK(g.done() == 40);
    }
}

TEST_CASE("measure history matches an independent replay") {
    std::mt19937_64 rng(42);
    for (int round = 0; round < 200; ++round) {
        Worker w;
        oracle::ThreadTrace trace;
        trace.start = std::uniform_real_distribution<double>(0.0, 100.0)(rng);
        w.start(trace.start, 1000);
        double t = trace.start;
        Iterations done = 0;
        const int n = std::uniform_int_distribution<int>(1, 20)(rng);
        for (int k = 0; k < n; ++k) {
            t += std::uniform_real_distribution<double>(0.01, 30.0)(rng);
            done += std::uniform_int_distribution<Iterations>(0, 500)(rng);
            w.add_measure(t, done);
            trace.reports.push_back({t, done});
        }
        const auto speeds = trace.speeds();
        REQUIRE(w.measures().size() == speeds.size());
        for (std::size_t k = 0; k < speeds.size(); ++k) {
            CHECK(w.measures()[k].speed == speeds[k]);
            CHECK(w.measures()[k].elapsed_since_start == trace.reports[k].t - trace.start);
        }
        CHECK(w.done() == trace.done());
    }
}

TEST_CASE("guess worker replay matches the reference") {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 200; ++round) {
        GuessWorker g;
        oracle::GuessTrace trace;
        g.start(0.0, 0);
        double t = 0.0;
        Iterations pred = 0;
        for (int k = 0; k < 12; ++k) {
            t += std::uniform_real_distribution<double>(0.5, 20.0)(rng);
            pred = std::max<Iterations>(0, pred + std::uniform_int_distribution<Iterations>(-100, 800)(rng));
            g.add_measure(t, pred);
            trace.reports.push_back({t, pred});
        }
        double speed = 0.0;
        Iterations done = 0;
        double last = 0.0;
        trace.replay(speed, done, last);
        CHECK(g.speed() == speed);
        CHECK(g.done() == done);
        CHECK(g.last_report_time() == last);
        CHECK(g.speed() >= 0.0);
    }
}

}
