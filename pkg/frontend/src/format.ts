/** Small display helpers shared by the views. */

export function estimateCost(workers: number, unitPay = 0.5): number {
    return workers * unitPay;
}

/** "$25" for whole amounts, "$12.50" otherwise. */
export function formatCost(amount: number): string {
    if (Number.isInteger(amount)) {
        return `$${amount}`;
    }
    return `$${amount.toFixed(2)}`;
}

export function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, attrs: Record<string, string> = {}, text = "",
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
        node.setAttribute(key, value);
    }
    if (text) {
        node.textContent = text;
    }
    return node;
}
