import { defineConfig } from "vitest/config";

export default defineConfig({
    test: {
        environment: "happy-dom",
        environmentOptions: {
            happyDOM: { settings: { disableIframePageLoading: true } },
        },
        include: ["tests/**/*.test.ts"],
        testTimeout: 30000,
        hookTimeout: 60000,
    },
});
