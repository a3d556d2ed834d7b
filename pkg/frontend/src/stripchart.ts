// Fixed-capacity strip chart buffer for the torque readout; the
// self-release shows as a sharp drop, which gets highlighted.

export interface ChartSample {
  t: number;
  value: number;
}

export class StripChart {
  readonly capacity: number;
  samples: ChartSample[] = [];
  dropAt: number | null = null;

  constructor(capacity = 600) {
    this.capacity = capacity;
  }

  push(t: number, value: number): void {
    const prev = this.samples[this.samples.length - 1];
    this.samples.push({ t, value });
    if (this.samples.length > this.capacity) this.samples.shift();
    // a release drop: torque collapses by more than half of a real reading
    if (prev && prev.value > 0.5 && value < prev.value * 0.4) {
      this.dropAt = t;
    }
  }

  range(): { min: number; max: number } {
    if (!this.samples.length) return { min: 0, max: 1 };
    let min = Infinity, max = -Infinity;
    for (const s of this.samples) {
      min = Math.min(min, s.value);
      max = Math.max(max, s.value);
    }
    return { min: Math.min(0, min), max: Math.max(max, 0.5) };
  }
}
