import { defineConfig } from "vite";

export default defineConfig({
  build: {
    outDir: "dist",
    target: "es2022",
  },
  test: {
    environment: "node",
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
