import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 120000,
    hookTimeout: 150000,
    pool: "threads",
    maxConcurrency: 1,
    fileParallelism: false,
  },
});
