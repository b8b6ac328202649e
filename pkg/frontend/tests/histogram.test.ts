import { describe, expect, it } from "vitest";

import { countBitstrings, histogramBars, renderHistogram } from "../src/histogram.js";

describe("histogram", () => {
  it("tallies bitstrings across circuits", () => {
    const counts = countBitstrings([
      ["00", "01", "00"],
      ["01", "00"],
    ]);
    expect(counts).toEqual({ "00": 3, "01": 2 });
  });

  it("orders bars by bitstring and scales by the tallest", () => {
    const bars = histogramBars({ "11": 1, "00": 4, "01": 2 });
    expect(bars.map((b) => b.bitstring)).toEqual(["00", "01", "11"]);
    expect(bars[0]!.frac).toBe(1);
    expect(bars[1]!.frac).toBe(0.5);
  });

  it("renders one bar per observed bitstring with the count attached", () => {
    const html = renderHistogram({
      id: "J-1",
      status: "ready",
      measurements: [["000", "000", "111"]],
    });
    expect(html).toContain('data-total="3"');
    expect(html).toContain('data-count="2"');
    expect(html).toContain('data-count="1"');
    expect(html).toContain(">000<");
    expect(html).toContain(">111<");
  });
});
