#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <lrbs/checkpoint.hpp>
#include <lrbs/io.hpp>

using namespace lrbs;

namespace {

std::filesystem::path temp_path(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "lrbs_io_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(InstanceIo, TspRoundTrip)
{
    const auto inst = gen_uniform_tsp(10, 0);
    const auto path = temp_path("tsp10.txt").string();
    write_instance(path, inst);
    const auto back = read_instance(path);
    ASSERT_TRUE(std::holds_alternative<Instance>(back));
    EXPECT_EQ(std::get<Instance>(back), inst);
}

TEST(InstanceIo, PdpRoundTripAndTextStable)
{
    const auto inst = gen_uniform_pdp(3, 2);
    std::ostringstream first;
    write_instance(first, AnyInstance{inst});
    std::istringstream in(first.str());
    const auto back = read_instance(in);
    EXPECT_EQ(std::get<PdInstance>(back), inst);
    std::ostringstream second;
    write_instance(second, back);
    EXPECT_EQ(first.str(), second.str());
}

TEST(InstanceIo, MultiRecordDataset)
{
    std::stringstream ss;
    write_instance(ss, gen_uniform_tsp(5, 1));
    ss << "\n# comment\n";
    write_instance(ss, gen_uniform_pdp(2, 1));
    write_instance(ss, gen_uniform_tsp(4, 2));
    const auto data = read_dataset(ss);
    ASSERT_EQ(data.size(), 3u);
    EXPECT_EQ(std::get<Instance>(data[0]), gen_uniform_tsp(5, 1));
    EXPECT_EQ(std::get<PdInstance>(data[1]), gen_uniform_pdp(2, 1));
    EXPECT_EQ(std::get<Instance>(data[2]), gen_uniform_tsp(4, 2));
}

TEST(InstanceIo, RejectsTwoNodes)
{
    std::istringstream in("TSP 2\n0 0\n1 1\n");
    try {
        read_instance(in);
        FAIL() << "expected a parse error";
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 1u);
    }
}

TEST(InstanceIo, ParseErrorsCarryLineNumbers)
{
    std::istringstream bad_number("TSP 3\n0 0\n0.5 abc\n1 1\n");
    try {
        read_instance(bad_number);
        FAIL();
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream truncated("TSP 4\n0 0\n0.5 0.5\n");
    EXPECT_THROW(read_instance(truncated), parse_error);
    std::istringstream header("TSPX 4\n");
    EXPECT_THROW(read_instance(header), parse_error);
}

TEST(InstanceIo, OutOfSquareIsValidationError)
{
    std::istringstream in("TSP 3\n0 0\n1.25 0\n1 1\n");
    EXPECT_THROW(read_instance(in), validation_error);
}

TEST(InstanceIo, PairsBlockReordersDeliveries)
{
    // Request 1 is delivered at node 4 and request 2 at node 3.
    std::istringstream in("PDP 2\n0.5 0.5\n0.1 0.1\n0.2 0.2\n0.8 0.8\n0.9 0.9\nPAIRS\n1 4\n2 3\n");
    const auto inst = std::get<PdInstance>(read_instance(in));
    EXPECT_EQ(inst.coord(inst.delivery_node(0)), (Point{0.9, 0.9}));
    EXPECT_EQ(inst.coord(inst.delivery_node(1)), (Point{0.8, 0.8}));
}

TEST(InstanceIo, DuplicatePickupInPairingRejected)
{
    std::istringstream in("PDP 2\n0.5 0.5\n0.1 0.1\n0.2 0.2\n0.8 0.8\n0.9 0.9\nPAIRS\n1 3\n1 4\n");
    try {
        read_instance(in);
        FAIL();
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 9u);
    }
    std::istringstream dup_delivery("PDP 2\n0.5 0.5\n0.1 0.1\n0.2 0.2\n0.8 0.8\n0.9 0.9\nPAIRS\n1 3\n2 3\n");
    EXPECT_THROW(read_instance(dup_delivery), parse_error);
}

TEST(InstanceIo, SingleInstanceReaderRejectsDatasets)
{
    std::stringstream ss;
    write_instance(ss, gen_uniform_tsp(5, 1));
    write_instance(ss, gen_uniform_tsp(5, 2));
    EXPECT_THROW(read_instance(ss), parse_error);
}

TEST(ResultsCsv, RoundTrip)
{
    std::vector<ResultRow> rows{{"0", "lrbs", 3.25, 3.0, 8.333333333333334, 120, 0.5, {}},
                                {"1", "bs", std::nullopt, std::nullopt, std::nullopt, 0, 0.0, {}}};
    std::stringstream ss;
    write_results(ss, rows);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), results_header);
    const auto back = read_results(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].obj, rows[0].obj);
    EXPECT_EQ(back[0].gap_percent, rows[0].gap_percent);
    EXPECT_EQ(back[0].steps, 120);
    EXPECT_FALSE(back[1].ok());
}

TEST(ResultsCsv, RejectsWrongHeader)
{
    std::istringstream in("id,method\n");
    EXPECT_THROW(read_results(in), parse_error);
}

TEST(Checkpoint, LosslessRoundTrip)
{
    for (auto kind : {ProblemKind::tsp, ProblemKind::pdp}) {
        auto params = PolicyParams::random(kind, 9, 0.7);
        params.temperature = 0.37;
        auto eas = eas_wrap(params);
        for (std::size_t i = 0; i < eas.phi.size(); ++i) eas.phi[i] = std::sin(static_cast<double>(i) + 0.1) / 3.0;
        std::stringstream ss;
        write_checkpoint(ss, params, &eas);
        const auto back = read_checkpoint(ss);
        EXPECT_EQ(back.params, params);
        ASSERT_TRUE(back.eas);
        EXPECT_EQ(back.eas->phi, eas.phi);
    }
}

TEST(Checkpoint, RejectsMalformed)
{
    std::istringstream wrong_size("lrbs-params 1\nkind tsp\ntemperature 1\ntensor theta 2\n0\n0\n");
    EXPECT_THROW(read_checkpoint(wrong_size), parse_error);
    std::istringstream wrong_magic("weights 1\n");
    EXPECT_THROW(read_checkpoint(wrong_magic), parse_error);
    std::istringstream bad_value("lrbs-params 1\nkind tsp\ntemperature 1\ntensor theta 68\nx\n");
    try {
        read_checkpoint(bad_value);
        FAIL();
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 5u);
    }
}
