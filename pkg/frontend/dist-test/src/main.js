/** Browser bootstrap. Reads `?base=` (service URL, default same origin port
 * 8321) and `?doc=`; without a doc id it shows a submission form whose POST
 * creates one and navigates to it. */
import { ApiClient } from "./api.js";
import { ReviewApp } from "./app.js";
function serviceBase(params) {
    return params.get("base") ?? `${window.location.protocol}//${window.location.hostname}:8321`;
}
async function bootstrap() {
    const root = document.getElementById("app");
    if (!root)
        throw new Error("missing #app element");
    const params = new URLSearchParams(window.location.search);
    const client = new ApiClient(serviceBase(params));
    const docId = params.get("doc");
    if (docId) {
        const app = new ReviewApp(root, client);
        await app.load(docId);
        return;
    }
    const form = document.createElement("form");
    form.className = "submit-form";
    form.innerHTML = `
    <h2>Analyze a paper</h2>
    <input name="title" placeholder="Title" class="submit-title">
    <textarea name="abstract" placeholder="Abstract" class="submit-abstract" rows="8"></textarea>
    <button type="submit">Analyze</button>
    <p class="submit-error hidden"></p>
  `;
    form.addEventListener("submit", async (event) => {
        event.preventDefault();
        const title = form.querySelector(".submit-title").value;
        const abstract = form.querySelector(".submit-abstract").value;
        const errorBox = form.querySelector(".submit-error");
        try {
            const { doc_id } = await client.submitPaper(title, abstract);
            params.set("doc", doc_id);
            window.location.search = params.toString();
        }
        catch (err) {
            errorBox.textContent = err instanceof Error ? err.message : String(err);
            errorBox.classList.remove("hidden");
        }
    });
    root.appendChild(form);
}
void bootstrap();
