import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 30000,
    hookTimeout: 60000,
    // the workflow suites share one spawned service and must not interleave
    fileParallelism: false,
  },
});
